#include "wrib/data.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"
#include "wrib/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace F = torch::nn::functional;

namespace wrib {
namespace {

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

std::string render_distance(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

DatasetIndex scan_dataset(const std::filesystem::path& root, const std::string& split) {
    const auto dir = root / split;
    if (!std::filesystem::is_directory(dir)) {
        throw MissingDirectory("dataset: no directory '" + dir.string() + "'");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    DatasetIndex index;
    index.split = split;
    for (const auto& file : files) {
        try {
            auto img = load_image_u8(file);
            index.entries.push_back(
                DatasetEntry{file.filename().string(), file, img.size(1), img.size(0)});
        } catch (const BadImage&) {
            // non-decodable file with an image extension: skip
        }
    }
    if (index.entries.empty()) {
        throw EmptyDataset("dataset: no decodable images under '" + dir.string() + "'");
    }
    return index;
}

torch::Tensor to_model_range(const torch::Tensor& image_u8) {
    if (image_u8.dim() != 3 || image_u8.size(2) != 3 || image_u8.dtype() != torch::kUInt8) {
        throw BadImage("to_model_range expects an HxWx3 u8 image");
    }
    auto f = image_u8.to(torch::kFloat32).div(255.0).mul(2.0).sub(1.0);
    return f.permute({2, 0, 1}).contiguous();
}

torch::Tensor from_model_range(const torch::Tensor& image) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw BadImage("from_model_range expects a 3xHxW image");
    }
    auto f = image.detach().to(torch::kFloat32).clamp(-1.0, 1.0).add(1.0).div(2.0).mul(255.0);
    return f.round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

torch::Tensor fit_min_size(const torch::Tensor& image, int64_t min_h, int64_t min_w) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw BadImage("fit_min_size expects a 3xHxW image");
    }
    const int64_t h = image.size(1);
    const int64_t w = image.size(2);
    if (h < 1 || w < 1) {
        throw ImageTooSmall("fit_min_size: empty image");
    }
    if (h >= min_h && w >= min_w) {
        return image;
    }
    const double scale = std::max(static_cast<double>(min_h) / h,
                                  static_cast<double>(min_w) / w);
    const auto nh = static_cast<int64_t>(std::ceil(h * scale));
    const auto nw = static_cast<int64_t>(std::ceil(w * scale));
    return F::interpolate(image.unsqueeze(0),
                          F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{nh, nw})
                              .mode(torch::kBilinear)
                              .align_corners(false))
        .squeeze(0);
}

std::string make_crop_id(const std::string& image_id, int64_t y, int64_t x) {
    return image_id + "#" + std::to_string(y) + "," + std::to_string(x);
}

CropId parse_crop_id(const std::string& id) {
    CropId out;
    const auto hash = id.rfind('#');
    if (hash == std::string::npos) {
        out.image_id = id;
        return out;
    }
    const auto comma = id.find(',', hash + 1);
    if (comma == std::string::npos) {
        out.image_id = id;
        return out;
    }
    try {
        out.y = std::stoll(id.substr(hash + 1, comma - hash - 1));
        out.x = std::stoll(id.substr(comma + 1));
        out.image_id = id.substr(0, hash);
    } catch (const std::exception&) {
        out = CropId{};
        out.image_id = id;
    }
    return out;
}

SelfReconSample make_self_recon_sample(const torch::Tensor& image, std::mt19937& rng,
                                       const std::string& source_id) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw BadImage("make_self_recon_sample expects a 3xHxW model-range image");
    }
    auto img = fit_min_size(image, kInputSize, kPanoramaWidth);
    const int64_t h = img.size(1);
    const int64_t w = img.size(2);
    if (h < kInputSize || w < kPanoramaWidth) {
        throw ImageTooSmall("make_self_recon_sample: cannot fit a 256x768 window");
    }
    std::uniform_int_distribution<int64_t> dy(0, h - kInputSize);
    std::uniform_int_distribution<int64_t> dx(0, w - kPanoramaWidth);
    const int64_t y = dy(rng);
    const int64_t x = dx(rng);
    auto window = img.narrow(1, y, kInputSize).narrow(2, x, kPanoramaWidth);
    auto thirds = split_thirds(window);
    return SelfReconSample{thirds.left.clone(), thirds.mid.clone(), thirds.right.clone(),
                           source_id};
}

std::vector<CrossPairSample> mine_cross_pairs(
    const std::vector<std::pair<std::string, torch::Tensor>>& crops, int64_t k,
    const DistanceFn& distance) {
    // A crop id may qualify its source image with a window suffix after
    // '#'; the same-image exclusion compares the image part only.
    auto image_of = [](const std::string& id) { return id.substr(0, id.find('#')); };
    std::vector<CrossPairSample> out;
    for (std::size_t qi = 0; qi < crops.size(); ++qi) {
        const auto& [query_id, query] = crops[qi];
        const std::string query_image = image_of(query_id);
        std::vector<std::pair<double, std::size_t>> ranked; // (distance, crop index)
        for (std::size_t ci = 0; ci < crops.size(); ++ci) {
            if (image_of(crops[ci].first) == query_image) {
                continue;
            }
            ranked.emplace_back(distance(query, crops[ci].second), ci);
        }
        if (static_cast<int64_t>(ranked.size()) < k) {
            throw InsufficientCandidates("pair mining: query '" + query_id + "' has only " +
                                         std::to_string(ranked.size()) +
                                         " candidates from other images, need " +
                                         std::to_string(k));
        }
        std::stable_sort(ranked.begin(), ranked.end());
        for (int64_t n = 0; n < k; ++n) {
            const auto& [d, ci] = ranked[static_cast<std::size_t>(n)];
            out.push_back(CrossPairSample{query, crops[ci].second,
                                          {query_id, crops[ci].first}, d});
        }
    }
    return out;
}

void write_pair_cache(const std::filesystem::path& path, const std::vector<PairRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw Error("pair cache: cannot open '" + path.string() + "' for writing");
    }
    for (const auto& r : records) {
        os << r.query_id << '\t' << r.neighbor_id << '\t' << render_distance(r.distance) << '\n';
    }
}

std::vector<PairRecord> read_pair_cache(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw Error("pair cache: cannot open '" + path.string() + "'");
    }
    std::vector<PairRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw Error("pair cache: malformed line " + std::to_string(lineno));
        }
        PairRecord r;
        r.query_id = line.substr(0, t1);
        r.neighbor_id = line.substr(t1 + 1, t2 - t1 - 1);
        try {
            r.distance = std::stod(line.substr(t2 + 1));
        } catch (const std::exception&) {
            throw Error("pair cache: bad distance on line " + std::to_string(lineno));
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace wrib

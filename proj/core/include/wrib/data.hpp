#ifndef WRIB_DATA_HPP
#define WRIB_DATA_HPP

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace wrib {

struct DatasetEntry {
    std::string image_id; // file name, unique within a split
    std::filesystem::path file_path;
    int64_t width = 0;
    int64_t height = 0;
};

struct DatasetIndex {
    std::string split; // "train" or "test"
    std::vector<DatasetEntry> entries;
};

// One training sample for the self-reconstruction objective: three
// 256x256 thirds of a single 256x768 crop.
struct SelfReconSample {
    torch::Tensor left, mid, right; // 3x256x256, model range
    std::string source_id;
};

// One fine-tuning sample built from two different images.
struct CrossPairSample {
    torch::Tensor left, right; // 3x256x256, model range
    std::pair<std::string, std::string> source_ids;
    double lpips_distance = 0.0;
};

// Scans `<root>/<split>` for decodable images, ordered by file name.
// Non-image files are skipped. Throws MissingDirectory / EmptyDataset.
DatasetIndex scan_dataset(const std::filesystem::path& root, const std::string& split);

// [0,255] u8 HxWx3 -> 3xHxW float in [-1,1], and the clamping/rounding inverse.
torch::Tensor to_model_range(const torch::Tensor& image_u8);
torch::Tensor from_model_range(const torch::Tensor& image);

// Upscales a 3xHxW image (aspect-preserving, bilinear) until a
// min_h x min_w window fits; already large images pass through untouched.
torch::Tensor fit_min_size(const torch::Tensor& image, int64_t min_h, int64_t min_w);

// Window-qualified crop ids, "<image_id>#<y>,<x>", where y,x locate the
// crop in the fit_min_size-upscaled image. They make mined pairs
// reproducible from the cache alone.
std::string make_crop_id(const std::string& image_id, int64_t y, int64_t x);

struct CropId {
    std::string image_id;
    int64_t y = -1, x = -1; // -1 when the id carries no window suffix
};
CropId parse_crop_id(const std::string& id);

// Upscales (aspect-preserving) until a 256x768 window fits, then crops a
// uniformly random window and splits it into thirds.
SelfReconSample make_self_recon_sample(const torch::Tensor& image, std::mt19937& rng,
                                       const std::string& source_id = "");

// Perceptual distance between two equally sized crops; smaller = more similar.
using DistanceFn = std::function<double(const torch::Tensor&, const torch::Tensor&)>;

// For each query crop, its k nearest neighbors under `distance`, never
// taken from the query's own image. Crop ids may qualify the image with
// a "#y,x" window suffix; the same-image exclusion ignores the suffix.
// Results for a query are sorted by ascending distance. Throws
// InsufficientCandidates.
std::vector<CrossPairSample> mine_cross_pairs(
    const std::vector<std::pair<std::string, torch::Tensor>>& crops, int64_t k,
    const DistanceFn& distance);

// Pair cache: one record per line, "query_id\tneighbor_id\tdistance".
struct PairRecord {
    std::string query_id, neighbor_id;
    double distance = 0.0;
};
void write_pair_cache(const std::filesystem::path& path, const std::vector<PairRecord>& records);
std::vector<PairRecord> read_pair_cache(const std::filesystem::path& path);

} // namespace wrib

#endif // WRIB_DATA_HPP

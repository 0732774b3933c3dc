#include "wrib/tensor_archive.hpp"

#include "wrib/errors.hpp"

#include <cstring>
#include <fstream>

namespace wrib {
namespace {

constexpr char kMagic[8] = {'W', 'R', 'I', 'B', 'A', 'R', 'C', 'H'};
constexpr uint32_t kFormatVersion = 1;

int32_t dtype_code(torch::Dtype d) {
    switch (d) {
        case torch::kFloat32: return 0;
        case torch::kFloat64: return 1;
        case torch::kInt64: return 2;
        case torch::kUInt8: return 3;
        case torch::kInt32: return 4;
        case torch::kInt8: return 5;
        case torch::kInt16: return 6;
        case torch::kBool: return 7;
        default: throw BadCheckpoint("archive: unsupported tensor dtype");
    }
}

torch::Dtype code_dtype(int32_t code) {
    switch (code) {
        case 0: return torch::kFloat32;
        case 1: return torch::kFloat64;
        case 2: return torch::kInt64;
        case 3: return torch::kUInt8;
        case 4: return torch::kInt32;
        case 5: return torch::kInt8;
        case 6: return torch::kInt16;
        case 7: return torch::kBool;
        default: throw CorruptCheckpoint("archive: unknown dtype code");
    }
}

template <typename T>
void write_pod(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) {
        throw CorruptCheckpoint("archive: truncated file");
    }
    return value;
}

void write_str(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    const auto len = read_pod<uint32_t>(is);
    if (len > (1u << 20)) {
        throw CorruptCheckpoint("archive: implausible string length");
    }
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) {
        throw CorruptCheckpoint("archive: truncated string");
    }
    return s;
}

} // namespace

void TensorArchive::put(const std::string& name, const torch::Tensor& t) {
    entries_[name] = t.detach().to(torch::kCPU).contiguous();
}

torch::Tensor TensorArchive::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw CorruptCheckpoint("archive: missing entry '" + name + "'");
    }
    return it->second;
}

bool TensorArchive::contains(const std::string& name) const {
    return entries_.count(name) > 0;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) {
        out.push_back(name);
    }
    return out;
}

void TensorArchive::put_string(const std::string& name, const std::string& value) {
    auto t = torch::empty({static_cast<int64_t>(value.size())}, torch::kUInt8);
    std::memcpy(t.data_ptr(), value.data(), value.size());
    put(name, t);
}

std::string TensorArchive::get_string(const std::string& name) const {
    auto t = get(name);
    if (t.dtype() != torch::kUInt8 || t.dim() != 1) {
        throw CorruptCheckpoint("archive: entry '" + name + "' is not a string");
    }
    return std::string(reinterpret_cast<const char*>(t.data_ptr()),
                       static_cast<std::size_t>(t.numel()));
}

void TensorArchive::put_int(const std::string& name, int64_t value) {
    put(name, torch::tensor(value, torch::kInt64));
}

int64_t TensorArchive::get_int(const std::string& name) const {
    auto t = get(name);
    if (t.dtype() != torch::kInt64 || t.numel() != 1) {
        throw CorruptCheckpoint("archive: entry '" + name + "' is not an integer");
    }
    return t.item<int64_t>();
}

void TensorArchive::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw BadCheckpoint("archive: cannot open '" + path.string() + "' for writing");
    }
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, kFormatVersion);
    write_str(os, tag_);
    write_pod<uint64_t>(os, entries_.size());
    for (const auto& [name, tensor] : entries_) { // std::map -> sorted by name
        write_str(os, name);
        write_pod<int32_t>(os, dtype_code(tensor.scalar_type()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(tensor.dim()));
        for (int64_t d : tensor.sizes()) {
            write_pod<int64_t>(os, d);
        }
        const auto bytes = static_cast<uint64_t>(tensor.numel() * tensor.element_size());
        write_pod<uint64_t>(os, bytes);
        os.write(static_cast<const char*>(tensor.const_data_ptr()),
                 static_cast<std::streamsize>(bytes));
    }
    if (!os) {
        throw BadCheckpoint("archive: write to '" + path.string() + "' failed");
    }
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw CorruptCheckpoint("archive: cannot open '" + path.string() + "'");
    }
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CorruptCheckpoint("archive: bad magic in '" + path.string() + "'");
    }
    const auto version = read_pod<uint32_t>(is);
    if (version != kFormatVersion) {
        throw CorruptCheckpoint("archive: unsupported format version " + std::to_string(version));
    }
    TensorArchive archive(read_str(is));
    const auto count = read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < count; ++i) {
        const std::string name = read_str(is);
        const auto dtype = code_dtype(read_pod<int32_t>(is));
        const auto ndim = read_pod<uint32_t>(is);
        if (ndim > 16) {
            throw CorruptCheckpoint("archive: implausible tensor rank");
        }
        std::vector<int64_t> sizes(ndim);
        for (auto& d : sizes) {
            d = read_pod<int64_t>(is);
            if (d < 0) {
                throw CorruptCheckpoint("archive: negative dimension");
            }
        }
        const auto bytes = read_pod<uint64_t>(is);
        auto tensor = torch::empty(sizes, dtype);
        if (bytes != static_cast<uint64_t>(tensor.numel() * tensor.element_size())) {
            throw CorruptCheckpoint("archive: payload size mismatch for '" + name + "'");
        }
        is.read(static_cast<char*>(tensor.data_ptr()), static_cast<std::streamsize>(bytes));
        if (!is) {
            throw CorruptCheckpoint("archive: truncated payload for '" + name + "'");
        }
        archive.entries_[name] = tensor;
    }
    // Anything after the last entry means the file was not written by us.
    is.peek();
    if (!is.eof()) {
        throw CorruptCheckpoint("archive: trailing bytes in '" + path.string() + "'");
    }
    return archive;
}

void save_module(TensorArchive& archive, const std::string& prefix,
                 const torch::nn::Module& module) {
    for (const auto& p : module.named_parameters(/*recurse=*/true)) {
        archive.put(prefix + "/" + p.key(), p.value());
    }
    for (const auto& b : module.named_buffers(/*recurse=*/true)) {
        archive.put(prefix + "/" + b.key(), b.value());
    }
}

void load_module(const TensorArchive& archive, const std::string& prefix,
                 torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    auto copy_into = [&](const std::string& key, torch::Tensor dst) {
        const std::string name = prefix + "/" + key;
        if (!archive.contains(name)) {
            throw BadCheckpoint("checkpoint: missing tensor '" + name + "'");
        }
        auto src = archive.get(name);
        if (src.sizes() != dst.sizes()) {
            throw BadCheckpoint("checkpoint: shape mismatch for '" + name + "'");
        }
        dst.copy_(src.to(dst.dtype()));
    };
    for (auto& p : module.named_parameters(/*recurse=*/true)) {
        copy_into(p.key(), p.value());
    }
    for (auto& b : module.named_buffers(/*recurse=*/true)) {
        copy_into(b.key(), b.value());
    }
}

} // namespace wrib

#ifndef WRIB_TENSOR_ARCHIVE_HPP
#define WRIB_TENSOR_ARCHIVE_HPP

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace wrib {

// Single-file archive of named tensors. Entries are written sorted by
// name so that save -> load -> save reproduces the file byte for byte.
class TensorArchive {
public:
    TensorArchive() = default;
    explicit TensorArchive(std::string tag) : tag_(std::move(tag)) {}

    const std::string& tag() const { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }

    void put(const std::string& name, const torch::Tensor& t);
    torch::Tensor get(const std::string& name) const; // throws CorruptCheckpoint if absent
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

    void put_string(const std::string& name, const std::string& value);
    std::string get_string(const std::string& name) const;
    void put_int(const std::string& name, int64_t value);
    int64_t get_int(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    // Throws CorruptCheckpoint on truncated or malformed files.
    static TensorArchive load(const std::filesystem::path& path);

private:
    std::string tag_;
    std::map<std::string, torch::Tensor> entries_;
};

// Copies all parameters and buffers of `module` into the archive under
// `prefix` / reads them back. Loading is shape-checked and runs without
// autograd tracking.
void save_module(TensorArchive& archive, const std::string& prefix, const torch::nn::Module& module);
void load_module(const TensorArchive& archive, const std::string& prefix, torch::nn::Module& module);

} // namespace wrib

#endif // WRIB_TENSOR_ARCHIVE_HPP

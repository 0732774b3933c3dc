#ifndef WRIB_IMAGE_IO_HPP
#define WRIB_IMAGE_IO_HPP

#include <torch/torch.h>

#include <filesystem>

namespace wrib {

// Decodes a PNG/JPEG file into an RGB HxWx3 u8 tensor. Throws BadImage.
torch::Tensor load_image_u8(const std::filesystem::path& path);

// Decodes straight into model range (3xHxW float in [-1,1]).
torch::Tensor load_image_model(const std::filesystem::path& path);

// Writes a model-range 3xHxW tensor as PNG.
void save_image_png(const std::filesystem::path& path, const torch::Tensor& image);

// Center-crops to square then resizes to size x size (bilinear). Used by
// the CLI to accept arbitrary input photos.
torch::Tensor center_crop_square_resize(const torch::Tensor& image, int64_t size);

} // namespace wrib

#endif // WRIB_IMAGE_IO_HPP

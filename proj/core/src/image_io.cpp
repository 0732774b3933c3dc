#include "wrib/image_io.hpp"

#include "wrib/data.hpp"
#include "wrib/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace wrib {

torch::Tensor load_image_u8(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw BadImage("cannot decode image '" + path.string() + "'");
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8);
    return t.clone();
}

torch::Tensor load_image_model(const std::filesystem::path& path) {
    return to_model_range(load_image_u8(path));
}

void save_image_png(const std::filesystem::path& path, const torch::Tensor& image) {
    auto u8 = from_model_range(image).contiguous(); // HxWx3 RGB
    cv::Mat rgb(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3,
                u8.data_ptr());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), bgr)) {
        throw BadImage("cannot write image '" + path.string() + "'");
    }
}

torch::Tensor center_crop_square_resize(const torch::Tensor& image, int64_t size) {
    if (image.dim() != 3 || image.size(2) != 3 || image.dtype() != torch::kUInt8) {
        throw BadImage("center_crop_square_resize expects an HxWx3 u8 image");
    }
    const int64_t h = image.size(0);
    const int64_t w = image.size(1);
    const int64_t side = std::min(h, w);
    auto crop = image.narrow(0, (h - side) / 2, side).narrow(1, (w - side) / 2, side).contiguous();
    cv::Mat src(static_cast<int>(side), static_cast<int>(side), CV_8UC3, crop.data_ptr());
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_LINEAR);
    auto out = torch::from_blob(dst.data, {size, size, 3}, torch::kUInt8);
    return out.clone();
}

} // namespace wrib

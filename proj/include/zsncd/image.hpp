#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace zsncd {

/// Row-major H x W x C intensities, nominal range [0, 1]. Noisy
/// observations may leave that range and are never clamped in memory.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

inline constexpr double kPsnrCapDb = 100.0;

/// Reads binary PGM (P5) or PPM (P6) with maxval 255; samples / 255.
Image read_image(const std::filesystem::path& path);
/// Writes P5 (1 channel) or P6 (3 channels); round(255 * clamp(v, 0, 1)).
void write_image(const Image& img, const std::filesystem::path& path);

/// Same as read_image/write_image but on an in-memory byte buffer.
Image decode_pnm(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_pnm(const Image& img);

double mse(const Image& a, const Image& b);
/// -10 log10(MSE), capped at kPsnrCapDb.
double psnr(const Image& a, const Image& b);
/// Windowed SSIM (11x11 Gaussian, sigma 1.5, valid windows only) on the
/// channel-mean grayscale of each input.
double ssim(const Image& a, const Image& b);
MetricReport compare(const Image& a, const Image& b);

Image to_gray(const Image& img);
Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height, std::size_t width);
Image center_crop(const Image& img, std::size_t height, std::size_t width);
Image clamp01(const Image& img);

}  // namespace zsncd

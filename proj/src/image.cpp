#include "zsncd/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "zsncd/error.hpp"

namespace zsncd {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kTruncatedPayload: return "truncated-payload";
    case ErrorCode::kUnsupportedMaxval: return "unsupported-maxval";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kTruncatedCheckpoint: return "truncated-checkpoint";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kUncoveredPixel: return "uncovered-pixel";
    case ErrorCode::kInvalidCodebook: return "invalid-codebook";
  }
  return "unknown";
}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw Error(ErrorCode::kShapeMismatch, "image data length does not match its extents");
  }
}

namespace {

// Cursor over a PNM header: whitespace-separated tokens, '#' comments.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) throw Error(ErrorCode::kMalformedHeader, "unexpected end of PNM header");
    return out;
  }

  std::size_t number() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        t.size() > 9) {
      throw Error(ErrorCode::kMalformedHeader, "bad number in PNM header: " + t);
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kMalformedHeader, "missing whitespace after maxval");
    }
    ++pos_;
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(std::span<const unsigned char> bytes) {
  HeaderReader header(bytes);
  const std::string magic = header.token();
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error(ErrorCode::kMalformedHeader, "unsupported PNM magic '" + magic + "'");
  }
  const std::size_t width = header.number();
  const std::size_t height = header.number();
  const std::size_t maxval = header.number();
  if (width == 0 || height == 0) throw Error(ErrorCode::kMalformedHeader, "zero image extent");
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedMaxval, "only maxval 255 is supported, got " + std::to_string(maxval));
  }
  header.end_header();
  const std::size_t count = width * height * channels;
  const std::size_t start = header.position();
  if (bytes.size() - start < count) {
    throw Error(ErrorCode::kTruncatedPayload, "PNM payload has " + std::to_string(bytes.size() - start) +
                                                  " bytes, expected " + std::to_string(count));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = bytes[start + i] / 255.0;
  return Image(height, width, channels, std::move(data));
}

std::vector<unsigned char> encode_pnm(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "PNM output needs 1 or 3 channels");
  }
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.data()) {
    out.push_back(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))));
  }
  return out;
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

void write_image(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kShapeMismatch, "images differ in shape");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double psnr(const Image& a, const Image& b) {
  const double err = mse(a, b);
  if (err <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -10.0 * std::log10(err));
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < img.channels(); ++ch) s += img.at(r, c, ch);
      out.at(r, c) = s / static_cast<double>(img.channels());
    }
  }
  return out;
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kShapeMismatch, "images differ in shape");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.height() < kWin || a.width() < kWin) {
    throw Error(ErrorCode::kInvalidArgument, "image smaller than the 11x11 SSIM window");
  }
  const Image ga = to_gray(a);
  const Image gb = to_gray(b);

  std::array<double, kWin> kernel{};
  double norm = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    norm += kernel[i];
  }
  for (double& k : kernel) k /= norm;

  const std::size_t out_h = a.height() - kWin + 1;
  const std::size_t out_w = a.width() - kWin + 1;
  double total = 0.0;
  for (std::size_t r = 0; r < out_h; ++r) {
    for (std::size_t c = 0; c < out_w; ++c) {
      double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double w = kernel[i] * kernel[j];
          const double va = ga.at(r + i, c + j);
          const double vb = gb.at(r + i, c + j);
          mu_a += w * va;
          mu_b += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - mu_a * mu_a;
      const double var_b = sbb - mu_b * mu_b;
      const double cov = sab - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
    }
  }
  return total / static_cast<double>(out_h * out_w);
}

MetricReport compare(const Image& a, const Image& b) { return {psnr(a, b), ssim(a, b)}; }

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  if (top + height > img.height() || left + width > img.width()) {
    throw Error(ErrorCode::kOutOfRange, "crop window exceeds image");
  }
  Image out(height, width, img.channels());
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(top + r, left + c, ch);
    }
  }
  return out;
}

Image center_crop(const Image& img, std::size_t height, std::size_t width) {
  if (height > img.height() || width > img.width()) {
    throw Error(ErrorCode::kOutOfRange, "crop window exceeds image");
  }
  return crop(img, (img.height() - height) / 2, (img.width() - width) / 2, height, width);
}

Image clamp01(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace zsncd

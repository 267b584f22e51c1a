#include "zsncd/patches.hpp"

#include <algorithm>
#include <limits>

namespace zsncd {

PatchIndexSet::PatchIndexSet(std::size_t height, std::size_t width, std::size_t k)
    : height_(height), width_(width), k_(k) {
  if (k == 0 || k > height || k > width) {
    throw Error(ErrorCode::kInvalidArgument, "no " + std::to_string(k) + "x" + std::to_string(k) +
                                                 " patch fits in a " + std::to_string(height) + "x" +
                                                 std::to_string(width) + " image");
  }
}

PatchIndex PatchIndexSet::at(std::size_t n) const {
  if (n >= size()) throw Error(ErrorCode::kOutOfRange, "patch ordinal out of range");
  return {n / cols(), n % cols()};
}

namespace {

void check_window(const Image& img, PatchIndex idx, std::size_t k) {
  if (k == 0 || idx.row + k > img.height() || idx.col + k > img.width()) {
    throw Error(ErrorCode::kOutOfRange, "patch at (" + std::to_string(idx.row) + "," + std::to_string(idx.col) +
                                            ") of size " + std::to_string(k) + " leaves the image");
  }
}

template <typename T>
void copy_window(const Image& img, PatchIndex idx, std::size_t k, T* dst) {
  const std::size_t c = img.channels();
  const auto src = img.data();
  for (std::size_t r = 0; r < k; ++r) {
    const double* row = src.data() + ((idx.row + r) * img.width() + idx.col) * c;
    for (std::size_t j = 0; j < k * c; ++j) *dst++ = static_cast<T>(row[j]);
  }
}

}  // namespace

template <typename T>
Tensor<T> extract(const Image& img, PatchIndex idx, std::size_t k) {
  check_window(img, idx, k);
  Tensor<T> out({k, k, img.channels()});
  copy_window(img, idx, k, out.data());
  return out;
}

template <typename T>
Tensor<T> extract_batch(const Image& img, std::span<const PatchIndex> indices, std::size_t k) {
  const std::size_t stride = k * k * img.channels();
  Tensor<T> out({indices.size(), k, k, img.channels()});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    check_window(img, indices[b], k);
    copy_window(img, indices[b], k, out.data() + b * stride);
  }
  return out;
}

std::vector<PatchIndex> sample_minibatch(const PatchIndexSet& set, std::size_t m, Rng& rng) {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "minibatch size must be positive");
  std::vector<PatchIndex> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(set.at(rng.below(set.size())));
  return out;
}

std::vector<std::uint32_t> coverage_map(std::size_t height, std::size_t width, std::size_t k) {
  const PatchIndexSet set(height, width, k);
  // Separable: count(r, c) = rows covering r times cols covering c.
  auto span_count = [k](std::size_t p, std::size_t n) {
    const std::size_t lo = p + 1 >= k ? p + 1 - k : 0;
    const std::size_t hi = std::min(p, n - k);
    return static_cast<std::uint32_t>(hi - lo + 1);
  };
  std::vector<std::uint32_t> out(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = span_count(r, height) * span_count(c, width);
  }
  return out;
}

Aggregator::Aggregator(std::size_t height, std::size_t width, std::size_t channels, std::size_t k)
    : height_(height), width_(width), channels_(channels), k_(k), sum_(height * width * channels),
      count_(height * width) {}

template <typename T>
void Aggregator::add(PatchIndex idx, const T* patch) {
  if (idx.row + k_ > height_ || idx.col + k_ > width_) {
    throw Error(ErrorCode::kOutOfRange, "aggregated patch leaves the image");
  }
  for (std::size_t r = 0; r < k_; ++r) {
    const std::size_t pix = (idx.row + r) * width_ + idx.col;
    double* dst = sum_.data() + pix * channels_;
    for (std::size_t j = 0; j < k_ * channels_; ++j) dst[j] += static_cast<double>(*patch++);
    for (std::size_t j = 0; j < k_; ++j) ++count_[pix + j];
  }
}

template <typename T>
void Aggregator::add_batch(std::span<const PatchIndex> indices, const Tensor<T>& patches) {
  const std::size_t stride = k_ * k_ * channels_;
  if (patches.size() != indices.size() * stride) {
    throw Error(ErrorCode::kShapeMismatch, "patch batch " + shape_string(patches.shape()) + " does not match " +
                                               std::to_string(indices.size()) + " indices");
  }
  for (std::size_t b = 0; b < indices.size(); ++b) add(indices[b], patches.data() + b * stride);
}

Image Aggregator::finish() const {
  Image out(height_, width_, channels_);
  auto dst = out.data();
  for (std::size_t p = 0; p < count_.size(); ++p) {
    if (count_[p] == 0) {
      throw Error(ErrorCode::kUncoveredPixel, "pixel (" + std::to_string(p / width_) + "," +
                                                  std::to_string(p % width_) + ") is covered by no patch");
    }
    for (std::size_t c = 0; c < channels_; ++c) dst[p * channels_ + c] = sum_[p * channels_ + c] / count_[p];
  }
  return out;
}

template <typename T>
Image aggregate(std::span<const PatchIndex> indices, const Tensor<T>& patches, std::size_t height,
                std::size_t width) {
  if (patches.rank() != 4 || patches.dim(1) != patches.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch, "expected [B, k, k, C] patches, got " + shape_string(patches.shape()));
  }
  Aggregator agg(height, width, patches.dim(3), patches.dim(1));
  agg.add_batch(indices, patches);
  return agg.finish();
}

template <typename T>
Image aggregate_single_offset(std::span<const PatchIndex> indices, const Tensor<T>& patches, std::size_t a,
                              std::size_t b, std::size_t height, std::size_t width) {
  if (patches.rank() != 4 || patches.dim(1) != patches.dim(2) || patches.dim(0) != indices.size()) {
    throw Error(ErrorCode::kShapeMismatch, "expected [B, k, k, C] patches, got " + shape_string(patches.shape()));
  }
  const std::size_t k = patches.dim(1), ch = patches.dim(3);
  if (a >= k || b >= k) throw Error(ErrorCode::kOutOfRange, "offset lies outside the patch");
  const PatchIndexSet set(height, width, k);
  constexpr std::size_t kMissing = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> where(set.size(), kMissing);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    if (!set.contains(indices[n])) throw Error(ErrorCode::kOutOfRange, "patch index outside the image");
    where[set.position(indices[n])] = n;
  }
  Image out(height, width, ch);
  const std::size_t stride = k * k * ch;
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t pr = std::min(r >= a ? r - a : 0, set.rows() - 1);
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t pc = std::min(c >= b ? c - b : 0, set.cols() - 1);
      const std::size_t n = where[set.position({pr, pc})];
      if (n == kMissing) {
        throw Error(ErrorCode::kUncoveredPixel,
                    "pixel (" + std::to_string(r) + "," + std::to_string(c) + ") has no window at this offset");
      }
      const T* src = patches.data() + n * stride + ((r - pr) * k + (c - pc)) * ch;
      for (std::size_t j = 0; j < ch; ++j) out.at(r, c, j) = static_cast<double>(src[j]);
    }
  }
  return out;
}

#define ZSNCD_INSTANTIATE(T)                                                                              \
  template Tensor<T> extract<T>(const Image&, PatchIndex, std::size_t);                                   \
  template Tensor<T> extract_batch<T>(const Image&, std::span<const PatchIndex>, std::size_t);            \
  template void Aggregator::add<T>(PatchIndex, const T*);                                                 \
  template void Aggregator::add_batch<T>(std::span<const PatchIndex>, const Tensor<T>&);                  \
  template Image aggregate<T>(std::span<const PatchIndex>, const Tensor<T>&, std::size_t, std::size_t);  \
  template Image aggregate_single_offset<T>(std::span<const PatchIndex>, const Tensor<T>&, std::size_t,   \
                                            std::size_t, std::size_t, std::size_t);

ZSNCD_INSTANTIATE(float)
ZSNCD_INSTANTIATE(double)
#undef ZSNCD_INSTANTIATE

}  // namespace zsncd

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zsncd/image.hpp"
#include "zsncd/rng.hpp"
#include "zsncd/tensor.hpp"

namespace zsncd {

/// Top-left corner of a k x k window, 0-based.
struct PatchIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchIndex&, const PatchIndex&) = default;
};

/// Every fully in-bounds k x k window of an h x w image, enumerated
/// row-major.
class PatchIndexSet {
 public:
  PatchIndexSet(std::size_t height, std::size_t width, std::size_t k);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t rows() const noexcept { return height_ - k_ + 1; }
  std::size_t cols() const noexcept { return width_ - k_ + 1; }
  std::size_t size() const noexcept { return rows() * cols(); }

  PatchIndex at(std::size_t n) const;
  std::size_t position(PatchIndex idx) const { return idx.row * cols() + idx.col; }
  bool contains(PatchIndex idx) const noexcept { return idx.row < rows() && idx.col < cols(); }

 private:
  std::size_t height_, width_, k_;
};

/// [k, k, C] copy of the window at `idx`.
template <typename T>
Tensor<T> extract(const Image& img, PatchIndex idx, std::size_t k);

/// [B, k, k, C] stack of the windows at `indices`.
template <typename T>
Tensor<T> extract_batch(const Image& img, std::span<const PatchIndex> indices, std::size_t k);

/// m draws from the set, uniform with replacement.
std::vector<PatchIndex> sample_minibatch(const PatchIndexSet& set, std::size_t m, Rng& rng);

/// Number of windows in the full set that cover each pixel, row-major.
std::vector<std::uint32_t> coverage_map(std::size_t height, std::size_t width, std::size_t k);

/// Running per-pixel sum and count of overlapping patch outputs; finish()
/// divides. Patches may be added in any number of batches.
class Aggregator {
 public:
  Aggregator(std::size_t height, std::size_t width, std::size_t channels, std::size_t k);

  template <typename T>
  void add(PatchIndex idx, const T* patch);
  /// `patches` is [B, k, k, C] matching `indices`.
  template <typename T>
  void add_batch(std::span<const PatchIndex> indices, const Tensor<T>& patches);

  /// Throws kUncoveredPixel if some pixel received no contribution.
  Image finish() const;

 private:
  std::size_t height_, width_, channels_, k_;
  std::vector<double> sum_;
  std::vector<std::uint32_t> count_;
};

template <typename T>
Image aggregate(std::span<const PatchIndex> indices, const Tensor<T>& patches, std::size_t height,
                std::size_t width);

/// Each pixel comes from the window in which it sits at in-patch offset
/// (a, b). Near the border the window index is clamped into range and the
/// pixel's actual offset in that window is used instead.
template <typename T>
Image aggregate_single_offset(std::span<const PatchIndex> indices, const Tensor<T>& patches, std::size_t a,
                              std::size_t b, std::size_t height, std::size_t width);

}  // namespace zsncd

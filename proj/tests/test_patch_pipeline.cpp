#include <gtest/gtest.h>

#include <numeric>

#include "zsncd/patches.hpp"

using namespace zsncd;

namespace {

Image ramp(std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i % 97) / 97.0;
  return img;
}

std::vector<PatchIndex> all_indices(const PatchIndexSet& set) {
  std::vector<PatchIndex> out;
  for (std::size_t n = 0; n < set.size(); ++n) out.push_back(set.at(n));
  return out;
}

ErrorCode error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::kIo;
}

}  // namespace

TEST(IndexSet, FourByFourExample) {
  const PatchIndexSet set(4, 4, 2);
  EXPECT_EQ(set.size(), 9u);
  EXPECT_EQ(set.at(0), (PatchIndex{0, 0}));
  EXPECT_EQ(set.at(5), (PatchIndex{1, 2}));
  EXPECT_EQ(set.at(8), (PatchIndex{2, 2}));
  EXPECT_EQ(set.position({2, 1}), 7u);
  EXPECT_FALSE(set.contains({3, 0}));
  EXPECT_THROW(set.at(9), Error);
}

TEST(IndexSet, Cardinality) {
  EXPECT_EQ(PatchIndexSet(256, 256, 8).size(), 249u * 249u);
  EXPECT_EQ(PatchIndexSet(512, 768, 16).size(), 497u * 753u);
  EXPECT_EQ(PatchIndexSet(8, 8, 8).size(), 1u);
  EXPECT_EQ(error_of([] { PatchIndexSet(7, 20, 8); }), ErrorCode::kInvalidArgument);
}

TEST(Extract, WholeImagePatch) {
  const Image img = ramp(8, 8, 3);
  const auto p = extract<double>(img, {0, 0}, 8);
  EXPECT_EQ(p.shape(), (Shape{8, 8, 3}));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(p[i], img.data()[i]);
}

TEST(Extract, BatchLayout) {
  const Image img = ramp(6, 5, 1);
  const std::vector<PatchIndex> idx{{0, 0}, {2, 1}};
  const auto b = extract_batch<float>(img, idx, 3);
  EXPECT_EQ(b.shape(), (Shape{2, 3, 3, 1}));
  EXPECT_EQ(b[9 + 4], static_cast<float>(img.at(3, 2)));
  EXPECT_EQ(error_of([&] { extract<double>(img, {4, 0}, 3); }), ErrorCode::kOutOfRange);
}

TEST(Minibatch, UniformFrequencies) {
  const PatchIndexSet set(4, 4, 2);
  Rng rng(11);
  std::vector<std::size_t> hits(set.size());
  const std::size_t draws = 1'000'000;
  for (std::size_t r = 0; r < draws / 1000; ++r) {
    for (const auto& p : sample_minibatch(set, 1000, rng)) ++hits[set.position(p)];
  }
  for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 1.0 / 9.0, 0.002);
}

TEST(Minibatch, Deterministic) {
  const PatchIndexSet set(64, 64, 8);
  Rng a(5), b(5);
  EXPECT_EQ(sample_minibatch(set, 32, a), sample_minibatch(set, 32, b));
  EXPECT_NE(sample_minibatch(set, 32, a), sample_minibatch(set, 32, b = Rng(6)));
}

TEST(Coverage, InteriorAndTotal) {
  const auto cov = coverage_map(256, 256, 8);
  EXPECT_EQ(cov[128 * 256 + 128], 64u);
  EXPECT_EQ(cov[0], 1u);
  EXPECT_EQ(cov[3 * 256 + 0], 4u);
  const std::uint64_t total = std::accumulate(cov.begin(), cov.end(), std::uint64_t{0});
  EXPECT_EQ(total, 249ull * 249ull * 64ull);
}

TEST(Aggregate, IdentityPatchesReproduceImage) {
  for (std::size_t c : {1u, 3u}) {
    const Image img = ramp(20, 17, c);
    const PatchIndexSet set(20, 17, 8);
    const auto idx = all_indices(set);
    const auto out = aggregate(std::span<const PatchIndex>(idx), extract_batch<double>(img, idx, 8), 20, 17);
    ASSERT_TRUE(out.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-12);
  }
}

TEST(Aggregate, ConstantPatches) {
  const PatchIndexSet set(12, 12, 4);
  const auto idx = all_indices(set);
  const Tensor<float> patches({idx.size(), 4, 4, 1}, 0.25f);
  const auto out = aggregate(std::span<const PatchIndex>(idx), patches, 12, 12);
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Aggregate, BatchedEqualsSingleShot) {
  const Image img = ramp(16, 16, 1);
  const PatchIndexSet set(16, 16, 8);
  const auto idx = all_indices(set);
  Aggregator agg(16, 16, 1, 8);
  for (std::size_t s = 0; s < idx.size(); s += 10) {
    const std::span<const PatchIndex> part(idx.data() + s, std::min<std::size_t>(10, idx.size() - s));
    agg.add_batch(part, extract_batch<double>(img, part, 8));
  }
  const auto whole = aggregate(std::span<const PatchIndex>(idx), extract_batch<double>(img, idx, 8), 16, 16);
  EXPECT_EQ(agg.finish(), whole);
}

TEST(Aggregate, UncoveredPixelIsReported) {
  const std::vector<PatchIndex> idx{{0, 0}};
  const Tensor<double> patches({1, 4, 4, 1});
  EXPECT_EQ(error_of([&] { aggregate(std::span<const PatchIndex>(idx), patches, 8, 8); }),
            ErrorCode::kUncoveredPixel);
}

TEST(SingleOffset, IdentityForEveryOffset) {
  const Image img = ramp(13, 11, 1);
  const PatchIndexSet set(13, 11, 4);
  const auto idx = all_indices(set);
  const auto patches = extract_batch<double>(img, idx, 4);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      EXPECT_EQ(aggregate_single_offset(std::span<const PatchIndex>(idx), patches, a, b, 13, 11), img);
    }
  }
}

TEST(SingleOffset, UnitPatchesMatchAggregate) {
  const Image img = ramp(6, 7, 3);
  const PatchIndexSet set(6, 7, 1);
  const auto idx = all_indices(set);
  Tensor<double> patches = extract_batch<double>(img, idx, 1);
  for (auto& v : patches.values()) v = 1.0 - v;
  EXPECT_EQ(aggregate_single_offset(std::span<const PatchIndex>(idx), patches, 0, 0, 6, 7),
            aggregate(std::span<const PatchIndex>(idx), patches, 6, 7));
}

TEST(SingleOffset, ReadsTheRequestedOffset) {
  const PatchIndexSet set(6, 6, 2);
  const auto idx = all_indices(set);
  // Patch n carries value n at every position; pixel (r, c) should come
  // from the window whose offset (1, 0) lands on it.
  Tensor<double> patches({idx.size(), 2, 2, 1});
  for (std::size_t n = 0; n < idx.size(); ++n) {
    for (std::size_t j = 0; j < 4; ++j) patches[n * 4 + j] = static_cast<double>(n);
  }
  const auto out = aggregate_single_offset(std::span<const PatchIndex>(idx), patches, 1, 0, 6, 6);
  EXPECT_EQ(out.at(3, 2), static_cast<double>(set.position({2, 2})));
  EXPECT_EQ(out.at(0, 4), static_cast<double>(set.position({0, 4})));
}

TEST(SingleOffset, MissingWindowIsReported) {
  const PatchIndexSet set(6, 6, 2);
  auto idx = all_indices(set);
  idx.pop_back();
  const Tensor<double> patches({idx.size(), 2, 2, 1});
  EXPECT_EQ(error_of([&] { aggregate_single_offset(std::span<const PatchIndex>(idx), patches, 0, 0, 6, 6); }),
            ErrorCode::kUncoveredPixel);
}

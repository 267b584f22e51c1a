#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zsncd/layers.hpp"

namespace zsncd {

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One bias-corrected Adam update over `params`, in order. Moments are
/// created on the first call; later calls must pass the same shapes.
/// Each parameter is clamped to its lower_bound afterwards.
template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params, double lr);

}  // namespace zsncd

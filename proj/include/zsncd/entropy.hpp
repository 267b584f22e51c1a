#pragma once

#include <array>
#include <span>
#include <vector>

#include "zsncd/layers.hpp"
#include "zsncd/rng.hpp"
#include "zsncd/tensor.hpp"

namespace zsncd {

inline constexpr double kProbabilityFloor = 1e-9;

/// Per-channel learned univariate distribution for latent codes. Each
/// channel owns a monotone map L: R -> R built from 1-3-3-3-1 stages
///   h <- softplus(H) h + b,  then  h <- h + tanh(a) * tanh(h)  (not last)
/// and c(t) = sigmoid(L(t)). The mass of integer v is c(v+.5) - c(v-.5).
/// Latent tensors are channels-last: element i belongs to channel i % C.
template <typename T>
class FactorizedDensity {
 public:
  static constexpr std::array<std::size_t, 5> kFilters{1, 3, 3, 3, 1};
  static constexpr std::size_t kStages = kFilters.size() - 1;

  FactorizedDensity() = default;
  FactorizedDensity(std::size_t channels, Rng& rng, double init_scale = 4.0);

  std::size_t channels() const noexcept { return channels_; }

  double cdf(std::size_t channel, double t) const;
  double mass(std::size_t channel, double v) const;

  /// Sum of -log2(max(P(v), floor)) over every latent value.
  double bits(const Tensor<T>& latent) const;
  /// Same value; also writes scale * d(bits)/d(latent) into latent_grad and
  /// accumulates scale * d(bits)/d(theta) into the parameter gradients.
  double bits_backward(const Tensor<T>& latent, T scale, Tensor<T>& latent_grad);

  std::span<Parameter<T>> parameters() noexcept { return params_; }
  std::span<const Parameter<T>> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

 private:
  struct Trace;

  const Parameter<T>& matrix(std::size_t k) const { return params_[3 * k]; }
  const Parameter<T>& bias(std::size_t k) const { return params_[3 * k + 1]; }
  const Parameter<T>& factor(std::size_t k) const { return params_[3 * k + 2]; }

  T logit(std::size_t channel, T x, Trace* trace) const;
  /// Accumulates scale * dL into parameter grads; returns dL/dx.
  T logit_backward(std::size_t channel, const Trace& trace, T upstream);

  std::size_t channels_ = 0;
  // Stage k stores matrix [C, f_out, f_in], bias [C, f_out] and, except the
  // last stage, factor [C, f_out].
  std::vector<Parameter<T>> params_;
};

/// Adds independent U[-0.5, 0.5) noise to each value.
template <typename T>
Tensor<T> relax(const Tensor<T>& latent, Rng& rng);

/// Rounds half away from zero.
template <typename T>
Tensor<T> quantize(const Tensor<T>& latent);

}  // namespace zsncd

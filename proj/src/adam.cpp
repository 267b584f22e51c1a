#include "zsncd/adam.hpp"

#include <algorithm>
#include <cmath>

namespace zsncd {

template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params, double lr) {
  if (state.m.empty() && state.step == 0) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state tracks " + std::to_string(state.m.size()) +
                                               " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.value.shape() != state.m[i].shape() || p.grad.shape() != p.value.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer moment shape differs for parameter '" + p.name + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T floor = p.lower_bound;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
      w[j] = std::max(w[j], floor);
    }
  }
}

template void adam_step<float>(AdamState<float>&, std::span<Parameter<float>* const>, double);
template void adam_step<double>(AdamState<double>&, std::span<Parameter<double>* const>, double);

}  // namespace zsncd

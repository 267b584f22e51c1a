#include "zsncd/entropy.hpp"

#include <cmath>

namespace zsncd {

namespace {

template <typename T>
T softplus(T x) {
  return x > T{0} ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace

template <typename T>
struct FactorizedDensity<T>::Trace {
  std::array<std::array<T, 3>, kStages> in{};
  std::array<std::array<T, 3>, kStages> z{};
};

template <typename T>
FactorizedDensity<T>::FactorizedDensity(std::size_t channels, Rng& rng, double init_scale) : channels_(channels) {
  if (channels == 0 || !(init_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "density needs at least one channel and a positive scale");
  }
  const double scale = std::pow(init_scale, 1.0 / static_cast<double>(kStages));
  for (std::size_t k = 0; k < kStages; ++k) {
    const std::size_t fin = kFilters[k], fout = kFilters[k + 1];
    const double init = std::log(std::expm1(1.0 / scale / static_cast<double>(fout)));
    params_.emplace_back("density_matrix_" + std::to_string(k),
                         Tensor<T>({channels, fout, fin}, static_cast<T>(init)));
    Tensor<T> b({channels, fout});
    for (auto& v : b.values()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
    params_.emplace_back("density_bias_" + std::to_string(k), std::move(b));
    if (k + 1 < kStages) params_.emplace_back("density_factor_" + std::to_string(k), Tensor<T>({channels, fout}));
  }
}

template <typename T>
std::size_t FactorizedDensity<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
T FactorizedDensity<T>::logit(std::size_t c, T x, Trace* trace) const {
  std::array<T, 3> h{x, 0, 0};
  for (std::size_t k = 0; k < kStages; ++k) {
    const std::size_t fin = kFilters[k], fout = kFilters[k + 1];
    const T* H = matrix(k).value.data() + c * fout * fin;
    const T* b = bias(k).value.data() + c * fout;
    std::array<T, 3> z{};
    for (std::size_t i = 0; i < fout; ++i) {
      T acc = b[i];
      for (std::size_t j = 0; j < fin; ++j) acc += softplus(H[i * fin + j]) * h[j];
      z[i] = acc;
    }
    if (trace) {
      trace->in[k] = h;
      trace->z[k] = z;
    }
    if (k + 1 < kStages) {
      const T* a = factor(k).value.data() + c * fout;
      for (std::size_t i = 0; i < fout; ++i) h[i] = z[i] + std::tanh(a[i]) * std::tanh(z[i]);
    } else {
      h = z;
    }
  }
  return h[0];
}

template <typename T>
T FactorizedDensity<T>::logit_backward(std::size_t c, const Trace& trace, T upstream) {
  std::array<T, 3> dh{upstream, 0, 0};
  for (std::size_t k = kStages; k-- > 0;) {
    const std::size_t fin = kFilters[k], fout = kFilters[k + 1];
    std::array<T, 3> dz = dh;
    if (k + 1 < kStages) {
      const T* a = factor(k).value.data() + c * fout;
      T* ga = params_[3 * k + 2].grad.data() + c * fout;
      for (std::size_t i = 0; i < fout; ++i) {
        const T ta = std::tanh(a[i]);
        const T tz = std::tanh(trace.z[k][i]);
        ga[i] += dh[i] * tz * (T{1} - ta * ta);
        dz[i] = dh[i] * (T{1} + ta * (T{1} - tz * tz));
      }
    }
    const T* H = matrix(k).value.data() + c * fout * fin;
    T* gH = params_[3 * k].grad.data() + c * fout * fin;
    T* gb = params_[3 * k + 1].grad.data() + c * fout;
    std::array<T, 3> dprev{};
    for (std::size_t i = 0; i < fout; ++i) {
      gb[i] += dz[i];
      for (std::size_t j = 0; j < fin; ++j) {
        gH[i * fin + j] += dz[i] * trace.in[k][j] * sigmoid(H[i * fin + j]);
        dprev[j] += dz[i] * softplus(H[i * fin + j]);
      }
    }
    dh = dprev;
  }
  return dh[0];
}

template <typename T>
double FactorizedDensity<T>::cdf(std::size_t channel, double t) const {
  if (channel >= channels_) throw Error(ErrorCode::kOutOfRange, "density channel out of range");
  return static_cast<double>(sigmoid(logit(channel, static_cast<T>(t), nullptr)));
}

template <typename T>
double FactorizedDensity<T>::mass(std::size_t channel, double v) const {
  if (channel >= channels_) throw Error(ErrorCode::kOutOfRange, "density channel out of range");
  const T lo = logit(channel, static_cast<T>(v - 0.5), nullptr);
  const T hi = logit(channel, static_cast<T>(v + 0.5), nullptr);
  // Evaluate in whichever tail keeps the subtraction well conditioned.
  const T s = lo + hi > T{0} ? T{-1} : T{1};
  return std::abs(static_cast<double>(sigmoid(s * hi) - sigmoid(s * lo)));
}

template <typename T>
double FactorizedDensity<T>::bits(const Tensor<T>& latent) const {
  double total = 0.0;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    total -= std::log2(std::max(mass(i % channels_, static_cast<double>(latent[i])), kProbabilityFloor));
  }
  return total;
}

template <typename T>
double FactorizedDensity<T>::bits_backward(const Tensor<T>& latent, T scale, Tensor<T>& latent_grad) {
  if (latent_grad.shape() != latent.shape()) latent_grad = Tensor<T>(latent.shape());
  const T inv_ln2 = static_cast<T>(1.0 / std::log(2.0));
  double total = 0.0;
  Trace lo_trace, hi_trace;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const std::size_t c = i % channels_;
    const T lo = logit(c, latent[i] - T(0.5), &lo_trace);
    const T hi = logit(c, latent[i] + T(0.5), &hi_trace);
    const T s = lo + hi > T{0} ? T{-1} : T{1};
    const T su = sigmoid(s * hi), sl = sigmoid(s * lo);
    const T diff = su - sl;
    const T p = std::abs(diff);
    if (static_cast<double>(p) <= kProbabilityFloor) {
      total -= std::log2(kProbabilityFloor);
      latent_grad[i] = T{0};
      continue;
    }
    total -= std::log2(static_cast<double>(p));
    // d(bits)/dP = -1 / (P ln 2); dP/d(diff) = sign(diff).
    const T dd = scale * (-inv_ln2 / p) * (diff > T{0} ? T{1} : T{-1});
    const T dhi = dd * su * (T{1} - su) * s;
    const T dlo = -dd * sl * (T{1} - sl) * s;
    latent_grad[i] = logit_backward(c, hi_trace, dhi) + logit_backward(c, lo_trace, dlo);
  }
  return total;
}

template <typename T>
Tensor<T> relax(const Tensor<T>& latent, Rng& rng) {
  Tensor<T> out = latent;
  for (auto& v : out.values()) v += static_cast<T>(rng.uniform() - 0.5);
  return out;
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& latent) {
  Tensor<T> out = latent;
  for (auto& v : out.values()) v = std::round(v);
  return out;
}

template class FactorizedDensity<float>;
template class FactorizedDensity<double>;
template Tensor<float> relax(const Tensor<float>&, Rng&);
template Tensor<double> relax(const Tensor<double>&, Rng&);
template Tensor<float> quantize(const Tensor<float>&);
template Tensor<double> quantize(const Tensor<double>&);

}  // namespace zsncd

#include "zsncd/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "zsncd/adam.hpp"

namespace zsncd {

CodecConfig TrainConfig::codec(std::size_t channels) const {
  return CodecConfig{variant, k, channels, hidden, kernel};
}

void TrainConfig::validate() const {
  if (total_steps < 1) throw Error(ErrorCode::kInvalidArgument, "total_steps must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (batch < 1) throw Error(ErrorCode::kInvalidArgument, "minibatch size must be positive");
  zsncd::validate(noise);
  if (distortion == Distortion::kPoissonNll && !std::holds_alternative<PoissonNoise>(noise)) {
    throw Error(ErrorCode::kInvalidArgument, "Poisson likelihood distortion needs a Poisson noise model");
  }
}

double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  if (cfg.variant == Variant::kMlp) return 1e-3;
  const std::size_t decay_at = cfg.total_steps - cfg.total_steps / 5;
  return step < decay_at ? 5e-3 : 5e-4;
}

template <typename T>
LossTerms patch_loss(CodecModel<T>& model, const Tensor<T>& patches, const Tensor<T>& noise, const TrainConfig& cfg,
                     bool backward) {
  const std::size_t batch = patches.dim(0);
  Tape<T> enc_tape, dec_tape;
  Tensor<T> latent = model.encode(patches, backward ? &enc_tape : nullptr);
  if (noise.shape() != latent.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "relaxation noise must match latent " + shape_string(latent.shape()));
  }
  for (std::size_t i = 0; i < latent.size(); ++i) latent[i] += noise[i];

  const T inv_batch = static_cast<T>(1.0 / static_cast<double>(batch));
  Tensor<T> latent_grad;
  const double bits = backward
                          ? model.density().bits_backward(latent, static_cast<T>(cfg.lambda) * inv_batch, latent_grad)
                          : model.density().bits(latent);

  Tensor<T> recon = model.decode(latent, backward ? &dec_tape : nullptr);
  Tensor<T> grad(recon.shape());
  double distortion = 0.0;
  if (cfg.distortion == Distortion::kMse) {
    constexpr double s2 = kIntensityScale * kIntensityScale;
    const T g = static_cast<T>(2.0 * s2) * inv_batch;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const T d = recon[i] - patches[i];
      distortion += s2 * static_cast<double>(d) * static_cast<double>(d);
      grad[i] = g * d;
    }
  } else {
    const double alpha = std::get<PoissonNoise>(cfg.noise).alpha;
    const T a = static_cast<T>(alpha);
    const T floor = static_cast<T>(kPoissonFloor);
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const T y = a * patches[i];
      const T c = recon[i];
      const T clipped = std::max(c, floor);
      distortion += alpha * static_cast<double>(c) - static_cast<double>(y) * std::log(static_cast<double>(clipped));
      grad[i] = (a - (c > floor ? y / c : T{0})) * inv_batch;
    }
  }

  if (backward) {
    grad.reshape(model.decoder().output_shape(latent.shape()));
    Tensor<T> g_latent = model.decoder().backward(dec_tape, grad);
    for (std::size_t i = 0; i < g_latent.size(); ++i) g_latent[i] += latent_grad[i];
    model.encoder().backward(enc_tape, g_latent);
  }

  LossTerms out;
  out.distortion = distortion / static_cast<double>(batch);
  out.bits = bits / static_cast<double>(batch);
  out.total = out.distortion + cfg.lambda * out.bits;
  return out;
}

template LossTerms patch_loss(CodecModel<float>&, const Tensor<float>&, const Tensor<float>&, const TrainConfig&,
                              bool);
template LossTerms patch_loss(CodecModel<double>&, const Tensor<double>&, const Tensor<double>&,
                              const TrainConfig&, bool);

CodecModel<float> train(const Image& y, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const PatchIndexSet set(y.height(), y.width(), cfg.k);
  CodecModel<float> model = options.init ? *options.init : CodecModel<float>(cfg.codec(y.channels()), cfg.seed);
  if (model.config().k != cfg.k || model.config().channels != y.channels()) {
    throw Error(ErrorCode::kShapeMismatch, "warm-start model does not match the image or patch size");
  }

  std::ofstream csv;
  if (!options.loss_csv.empty()) {
    csv.open(options.loss_csv, std::ios::trunc);
    if (!csv) throw Error(ErrorCode::kIo, "cannot open '" + options.loss_csv.string() + "' for writing");
    csv << "step,distortion,rate_bits,lr\n";
  }

  Rng rng(cfg.seed, 0x747261696eULL);
  AdamState<float> adam;
  auto params = model.parameters();
  Tensor<float> noise(model.latent_shape(cfg.batch));
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const auto indices = sample_minibatch(set, cfg.batch, rng);
    const Tensor<float> patches = extract_batch<float>(y, indices, cfg.k);
    for (auto& u : noise.values()) u = static_cast<float>(rng.uniform() - 0.5);

    model.zero_grad();
    const LossTerms loss = patch_loss(model, patches, noise, cfg, true);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError(static_cast<long>(step), "training diverged at step " + std::to_string(step));
    }
    const double lr = lr_schedule(step, cfg);
    adam_step<float>(adam, params, lr);

    const StepRecord rec{step, loss.distortion, loss.bits, lr};
    if (csv.is_open()) csv << step << ',' << loss.distortion << ',' << loss.bits << ',' << lr << '\n';
    if (options.on_step) options.on_step(rec);
  }
  if (csv.is_open() && !csv) throw Error(ErrorCode::kIo, "failed writing '" + options.loss_csv.string() + "'");
  return model;
}

Tensor<float> reconstruct_patches(const Image& y, const CodecModel<float>& model, std::span<const PatchIndex> indices,
                                  double* bits) {
  const Tensor<float> patches = extract_batch<float>(y, indices, model.config().k);
  const Tensor<float> latent = quantize(model.encode(patches));
  if (bits) *bits = model.density().bits(latent);
  return model.decode(latent);
}

DenoiseResult denoise(const Image& y, const CodecModel<float>& model, std::size_t steps) {
  if (y.channels() != model.config().channels) {
    throw Error(ErrorCode::kShapeMismatch, "model expects " + std::to_string(model.config().channels) +
                                               " channels, image has " + std::to_string(y.channels()));
  }
  const std::size_t k = model.config().k;
  const PatchIndexSet set(y.height(), y.width(), k);
  Aggregator agg(y.height(), y.width(), y.channels(), k);
  constexpr std::size_t kChunk = 512;
  double total_bits = 0.0;
  std::vector<PatchIndex> chunk;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    chunk.clear();
    for (std::size_t n = start; n < std::min(set.size(), start + kChunk); ++n) chunk.push_back(set.at(n));
    double bits = 0.0;
    agg.add_batch<float>(chunk, reconstruct_patches(y, model, chunk, &bits));
    total_bits += bits;
  }
  DenoiseResult out;
  out.estimate = agg.finish();
  out.residual = mse(out.estimate, y);
  out.rate_bits_mean = total_bits / static_cast<double>(set.size());
  out.steps = steps;
  return out;
}

LambdaSearchResult search_lambda(const std::function<double(double)>& residual_at, const LambdaSearchConfig& s) {
  if (!(s.lambda0 > 0) || !(s.tol > 0) || !(s.zeta > 0 && s.zeta < 1) || s.k_max < 1 || !(s.tau > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda search needs lambda0 > 0, tol > 0, zeta in (0,1), "
                                             "k_max >= 1 and tau > 0");
  }
  LambdaSearchResult out;
  double lambda = s.lambda0;
  for (std::size_t it = 0; it < s.k_max; ++it) {
    const double r = residual_at(lambda);
    const double beta = (r - s.tau) / s.tau;
    out.probes.push_back({lambda, r, beta});
    if (std::abs(beta) <= s.tol) {
      out.lambda = lambda;
      out.converged = true;
      return out;
    }
    const double step = 1.0 + s.zeta * std::abs(beta);
    lambda = beta > 0 ? lambda / step : lambda * step;
  }
  const auto best = std::min_element(out.probes.begin(), out.probes.end(), [](const auto& a, const auto& b) {
    return std::abs(a.beta) < std::abs(b.beta);
  });
  out.lambda = best->lambda;
  return out;
}

LambdaSearchResult tune_lambda(const Image& y, const TrainConfig& cfg, const LambdaSearchConfig& s,
                               const std::function<void(const LambdaProbe&)>& on_probe) {
  auto residual_at = [&](double lambda) {
    TrainConfig probe = cfg;
    probe.lambda = lambda;
    probe.total_steps = s.probe_steps;
    const double r = denoise(y, train(y, probe)).residual;
    if (on_probe) on_probe({lambda, r, (r - s.tau) / s.tau});
    return r;
  };
  return search_lambda(residual_at, s);
}

DatasetProfile parse_profile(const std::string& name) {
  if (name == "set11" || name == "set11-gray") return DatasetProfile::kSet11Gray;
  if (name == "kodak" || name == "kodak-rgb") return DatasetProfile::kKodakRgb;
  throw Error(ErrorCode::kInvalidArgument, "unknown dataset profile '" + name + "' (expected set11 or kodak)");
}

namespace {

struct LambdaTable {
  std::array<double, 3> level;
  std::array<double, 3> lambda;
};

double interpolate(const LambdaTable& t, double level) {
  if (level <= t.level.front()) return t.lambda.front();
  if (level >= t.level.back()) return t.lambda.back();
  for (std::size_t i = 0; i + 1 < t.level.size(); ++i) {
    if (level == t.level[i]) return t.lambda[i];
    if (level < t.level[i + 1]) {
      const double f = std::log(level / t.level[i]) / std::log(t.level[i + 1] / t.level[i]);
      return std::exp(std::log(t.lambda[i]) + f * std::log(t.lambda[i + 1] / t.lambda[i]));
    }
  }
  return t.lambda.back();
}

}  // namespace

double default_lambda(DatasetProfile profile, const NoiseModel& noise) {
  validate(noise);
  static const LambdaTable kSet11Awgn{{15, 25, 50}, {300, 850, 3000}};
  static const LambdaTable kSet11Poisson{{15, 25, 50}, {3000, 1500, 1000}};
  static const LambdaTable kKodakAwgn{{15, 25, 50}, {75, 150, 750}};
  static const LambdaTable kKodakPoisson{{15, 25, 50}, {750, 300, 150}};
  const bool gray = profile == DatasetProfile::kSet11Gray;
  if (const auto* g = std::get_if<Awgn>(&noise)) {
    // Rounded so that 25/255 maps back to exactly 25.
    const double level = std::round(g->sigma * kIntensityScale * 1e9) / 1e9;
    return interpolate(gray ? kSet11Awgn : kKodakAwgn, level);
  }
  return interpolate(gray ? kSet11Poisson : kKodakPoisson, std::get<PoissonNoise>(noise).alpha);
}

}  // namespace zsncd

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "zsncd/codec.hpp"
#include "zsncd/image.hpp"
#include "zsncd/noise.hpp"
#include "zsncd/patches.hpp"

namespace zsncd {

enum class Distortion { kMse, kPoissonNll };

inline constexpr double kPoissonFloor = 1e-4;
/// Distortion is measured on the 8-bit intensity scale.
inline constexpr double kIntensityScale = 255.0;

struct TrainConfig {
  Variant variant = Variant::kConv;
  std::size_t k = 8;
  double lambda = 850.0;
  std::size_t total_steps = 20000;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  NoiseModel noise = Awgn{25.0 / 255.0};
  Distortion distortion = Distortion::kMse;
  /// Architecture overrides; 0 keeps the defaults.
  std::size_t hidden = 0;
  std::size_t kernel = 3;

  CodecConfig codec(std::size_t channels) const;
  void validate() const;
};

/// Conv: 5e-3 until 80% of total_steps (step 16000 of 20000), 5e-4 after.
/// MLP: 1e-3 throughout.
double lr_schedule(std::size_t step, const TrainConfig& cfg);

struct LossTerms {
  double distortion = 0.0;  // batch mean
  double bits = 0.0;        // batch mean
  double total = 0.0;       // distortion + lambda * bits
};

/// Rate-distortion objective on a [B, k, k, C] batch with the relaxation
/// noise supplied explicitly (same shape as the latent). MSE distortion is
/// the summed squared error on the 0-255 scale; PoissonNLL is
/// sum(alpha c - y log max(c, floor)) with y the patch counts (alpha times
/// the normalized patch). When `backward` is set, gradients of the total are
/// accumulated into the model's parameters.
template <typename T>
LossTerms patch_loss(CodecModel<T>& model, const Tensor<T>& patches, const Tensor<T>& noise,
                     const TrainConfig& cfg, bool backward);

struct StepRecord {
  std::size_t step = 0;
  double distortion = 0.0;
  double bits = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  /// Warm start; otherwise a fresh model is built from cfg.seed.
  const CodecModel<float>* init = nullptr;
  /// When set, writes step,distortion,rate_bits,lr per step.
  std::filesystem::path loss_csv;
  std::function<void(const StepRecord&)> on_step;
};

/// Adam on random minibatches of overlapping patches of y. Throws
/// DivergenceError on a non-finite loss.
CodecModel<float> train(const Image& y, const TrainConfig& cfg, const TrainOptions& options = {});

struct DenoiseResult {
  Image estimate;
  double residual = 0.0;        // ||x_hat - y||^2 / n
  double rate_bits_mean = 0.0;  // per patch, quantized latents
  std::size_t steps = 0;
};

/// decode(quantize(encode(.))) of the windows at `indices`, [B, k, k, C].
/// `bits` (optional) receives the summed rate of the quantized latents.
Tensor<float> reconstruct_patches(const Image& y, const CodecModel<float>& model,
                                  std::span<const PatchIndex> indices, double* bits = nullptr);

/// Every window of y through the model, averaged over overlaps.
DenoiseResult denoise(const Image& y, const CodecModel<float>& model, std::size_t steps = 0);

struct LambdaSearchConfig {
  double lambda0 = 500.0;
  double tol = 0.1;
  double zeta = 0.5;
  std::size_t k_max = 12;
  double tau = 0.0;
  std::size_t probe_steps = 2000;
};

struct LambdaProbe {
  double lambda = 0.0;
  double residual = 0.0;
  double beta = 0.0;
};

struct LambdaSearchResult {
  double lambda = 0.0;
  bool converged = false;
  std::vector<LambdaProbe> probes;
};

/// The iteration itself, over any residual oracle lambda -> r:
/// beta = (r - tau) / tau; stop when |beta| <= tol; otherwise
/// lambda / (1 + zeta |beta|) if beta > 0, else lambda * (1 + zeta |beta|).
/// On exhaustion returns the probe with the smallest |beta|, unconverged.
LambdaSearchResult search_lambda(const std::function<double(double)>& residual_at, const LambdaSearchConfig& s);

/// search_lambda with each probe a fresh short training run on y (same
/// seed every probe) followed by denoise.
LambdaSearchResult tune_lambda(const Image& y, const TrainConfig& cfg, const LambdaSearchConfig& s,
                               const std::function<void(const LambdaProbe&)>& on_probe = {});

enum class DatasetProfile { kSet11Gray, kKodakRgb };

DatasetProfile parse_profile(const std::string& name);

/// Tabulated per-dataset lambda; between tabulated noise levels the value
/// is interpolated log-log and clamped at the ends.
double default_lambda(DatasetProfile profile, const NoiseModel& noise);

}  // namespace zsncd

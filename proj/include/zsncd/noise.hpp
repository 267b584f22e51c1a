#pragma once

#include <filesystem>
#include <variant>

#include "zsncd/image.hpp"
#include "zsncd/rng.hpp"

namespace zsncd {

/// sigma on the [0, 1] intensity scale.
struct Awgn {
  double sigma = 0.0;
};

/// y ~ Poisson(alpha * x) / alpha.
struct PoissonNoise {
  double alpha = 1.0;
};

using NoiseModel = std::variant<Awgn, PoissonNoise>;

void validate(const NoiseModel& model);

/// y = x + N(0, sigma^2) per sample, not clamped.
Image add_awgn(const Image& x, double sigma, Rng& rng);

struct PoissonObservation {
  Image normalized;  // counts / alpha
  Image counts;      // raw photon counts
};

PoissonObservation add_poisson(const Image& x, double alpha, Rng& rng);

/// One-level Haar diagonal detail, median(|d|) / 0.6745, pooled over
/// channels.
double estimate_sigma(const Image& y);

/// 2 * mean of raw counts.
double estimate_alpha(const Image& counts);

/// Target mean squared residual: sigma^2 for AWGN, 1 / (2 alpha) for Poisson.
double residual_threshold(const NoiseModel& model);

/// -10 log10(tau); the PSNR an estimate at exactly the threshold would show.
double threshold_psnr(double tau);

/// Plain (P2) PGM/ASCII PPM (P3) of integer counts, maxval up to 65535.
void write_counts(const Image& counts, const std::filesystem::path& path);
Image read_counts(const std::filesystem::path& path);

}  // namespace zsncd

#pragma once

#include <cstdint>
#include <vector>

#include "zsncd/rng.hpp"

namespace zsncd::theory {

using Vector = std::vector<double>;

enum class Loss { kAwgnMse, kPoissonMl, kPoissonMse };

/// An explicit list of reconstruction vectors; rate = log2(count).
struct Codebook {
  std::size_t n = 0;
  std::vector<Vector> words;

  double rate() const;
};

/// sum (y - c)^2, sum (alpha c - y log c), or sum (c - y / alpha)^2.
double codeword_loss(const Vector& y, const Vector& c, Loss loss, double alpha = 1.0);

struct Selection {
  std::size_t index = 0;
  Vector codeword;
};

/// Exhaustive argmin of codeword_loss; ties go to the lowest index.
Selection codebook_denoise(const Vector& y, const Codebook& book, Loss loss, double alpha = 1.0);

/// Code for k-sparse vectors with entries in [-1, 1]: the support is kept
/// exactly and every nonzero is quantized with b bits to the midpoints of
/// 2^b equal cells, b = max(0, ceil(log2(k / (n delta)) / 2)).
/// The codebook holds every vector with at most k nonzeros drawn from
/// those levels.
class SparseCode {
 public:
  struct Symbol {
    std::vector<std::size_t> support;
    std::vector<std::uint32_t> levels;
  };

  SparseCode(std::size_t n, std::size_t k, double delta);
  /// Explicit bit depth; may undershoot the distortion target.
  SparseCode(std::size_t n, std::size_t k, double delta, unsigned bits);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  double delta() const noexcept { return delta_; }
  unsigned bits() const noexcept { return bits_; }
  const Vector& levels() const noexcept { return levels_; }

  /// sum_{j<=k} C(n, j) 2^(b j).
  double codeword_count() const;
  double rate() const;
  /// (k/2) log2(k / (n delta)) + k log2(n / k) + log2 k + k (log2 e + 1).
  double rate_bound() const;
  /// Worst-case ||x - g(f(x))||^2 / n over the signal class, k 2^(-2b) / n.
  double worst_distortion() const;

  Symbol encode(const Vector& x) const;
  Vector decode(const Symbol& s) const;

  /// Exact argmin over the whole codebook of ||y - c||^2, found by keeping
  /// the (at most k) coordinates whose best nonzero level beats zero by the
  /// widest margin.
  Vector denoise(const Vector& y) const;

  /// Explicit codebook, enumeration order: support size, then lexicographic
  /// support, then level digits. Throws when larger than max_words.
  Codebook enumerate(std::size_t max_words = std::size_t{1} << 20) const;

 private:
  std::size_t nearest_level(double v) const;

  std::size_t n_, k_;
  double delta_;
  unsigned bits_;
  Vector levels_;
};

/// Block-constant code on (x_min, x_max)^n: n splits into equal blocks and
/// each block takes one of 2^bits cell midpoints. Rate blocks * bits,
/// worst-case per-coordinate squared error (cell / 2)^2.
class BlockCode {
 public:
  BlockCode(std::size_t n, std::size_t blocks, unsigned bits, double x_min, double x_max);

  std::size_t n() const noexcept { return n_; }
  std::size_t blocks() const noexcept { return blocks_; }
  std::size_t block_size() const noexcept { return n_ / blocks_; }
  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  const Vector& levels() const noexcept { return levels_; }
  double rate() const;
  double delta() const;

  /// Nearest codeword to x.
  Vector project(const Vector& x) const;
  /// Exact argmin over the codebook; the loss separates over blocks.
  Vector denoise(const Vector& y, Loss loss, double alpha = 1.0) const;
  Codebook enumerate(std::size_t max_words = std::size_t{1} << 20) const;

 private:
  std::size_t n_, blocks_;
  double x_min_, x_max_;
  Vector levels_;
};

struct BoundParams {
  std::size_t n = 64;
  double rate = 0.0;
  double delta = 0.0;
  double eta = 0.5;
  double sigma = 0.0;
  double alpha = 1.0;
  double x_min = 0.1;
  double x_max = 0.9;
};

struct Bound {
  double value = 0.0;
  double failure_prob = 0.0;
};

/// 2^(-eta R + 2), capped at 1.
double failure_ceiling(double eta, double rate);

/// Per-sqrt(n) error: sqrt(delta) + 2 sigma sqrt(2 ln2 R / n)(1 + 2 sqrt(eta)).
Bound bound_thm1(const BoundParams& p);

double thm2_c1(const BoundParams& p);
/// (x_max^2 / x_min^3) ln(1 / x_min) sqrt(4 / ln 2)(sqrt(1 + eta) + sqrt(eta)).
double thm2_c2(const BoundParams& p);
/// Per-n squared error: C1 delta + C2 sqrt(R / (n alpha)).
Bound bound_thm2(const BoundParams& p);

/// 4 sqrt(ln 2)(sqrt(1 + eta) + sqrt(eta) + 1).
double thm4_c(double eta);
/// Per-n squared error: delta + C sqrt(R / (n alpha)).
Bound bound_thm4(const BoundParams& p);

struct ValidationConfig {
  int theorem = 1;
  std::size_t n = 64;
  /// Sparsity for theorem 1.
  std::size_t k = 4;
  /// Distortion target for theorem 1; 0 selects 1 / n.
  double delta = 0.0;
  /// Overrides the sparse code's bit depth when nonzero.
  unsigned sparse_bits = 0;
  double eta = 0.5;
  double sigma = 0.1;
  double alpha = 25.0;
  double x_min = 0.1;
  double x_max = 0.9;
  /// Block code for theorems 2 and 4.
  std::size_t blocks = 4;
  unsigned block_bits = 3;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
};

struct ValidationResult {
  int theorem = 1;
  std::size_t n = 0;
  double rate = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  double bound = 0.0;
  double ceiling = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double empirical_rate = 0.0;
  /// sqrt(ceiling (1 - ceiling) / trials).
  double std_error = 0.0;
  double mean_error = 0.0;
  double max_error = 0.0;

  /// empirical_rate <= ceiling + 3 std_error.
  bool within_ceiling() const;
};

/// Monte Carlo over independent trials (trial t uses stream t of the seed):
/// draw a signal from the code's class, add noise, decode with the
/// theorem's loss and compare the error against the bound.
/// Theorem 1: k-sparse x, support uniform without replacement, values
/// uniform on [-1, 1], sparse code. Theorems 2 and 4: block-constant x with
/// values uniform on [x_min, x_max], block code.
ValidationResult validate_theorem(const ValidationConfig& cfg);

/// KL(Poisson(a1) || Poisson(a2)) in nats.
double poisson_kl(double a1, double a2);

struct Sandwich {
  double lower = 0.0;
  double kl = 0.0;
  double upper = 0.0;
  bool holds = false;
};

/// Both sides of the quadratic KL sandwich for rates within [a_min, a_max].
Sandwich kl_sandwich(double a1, double a2, double a_min, double a_max);

struct GridSweep {
  std::size_t checks = 0;
  std::size_t failures = 0;
};

/// steps x steps grid over [lo, hi]^2, each point checked with the grid
/// range as (a_min, a_max) and with the tightest range min/max(a1, a2).
GridSweep kl_sandwich_grid(double lo, double hi, std::size_t steps);

struct TailConfig {
  Vector weights;
  Vector means;
  double t = 0.0;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
};

struct TailResult {
  double sigma2 = 0.0;  // sum w^2 mean
  double w_max = 0.0;
  double t = 0.0;
  double bound = 0.0;  // exp(-t^2 / (2 (sigma2 + w_max t / 3)))
  double upper_rate = 0.0;
  double lower_rate = 0.0;
  std::size_t trials = 0;

  /// Both empirical tails <= bound + 3 sqrt(bound (1 - bound) / trials).
  bool holds() const;
};

double tail_bound(double sigma2, double w_max, double t);

/// Empirical upper and lower tail frequencies of sum w_i Y_i around its
/// mean, Y_i ~ Poisson(mean_i). t must lie in [0, 3 sigma2 / (2 w_max)].
TailResult validate_poisson_tail(const TailConfig& cfg);

}  // namespace zsncd::theory

namespace zsncd::theory {

/// Five weight/mean settings of length n with t = t_factor * sigma_n,
/// clipped to the validity window: unit weights, alternating signs,
/// log(1 / c) weights with c uniform on (0.1, 0.9), uniform [-1, 1] weights,
/// and a ramp of weights against a ramp of means.
std::vector<TailConfig> lemma2_configurations(std::size_t n, double mean, double t_factor, std::size_t trials,
                                              std::uint64_t seed);

}  // namespace zsncd::theory

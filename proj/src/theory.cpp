#include "zsncd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zsncd/error.hpp"

namespace zsncd::theory {

double Codebook::rate() const {
  if (words.empty()) throw Error(ErrorCode::kInvalidCodebook, "codebook is empty");
  return std::log2(static_cast<double>(words.size()));
}

double codeword_loss(const Vector& y, const Vector& c, Loss loss, double alpha) {
  if (y.size() != c.size()) throw Error(ErrorCode::kShapeMismatch, "observation and codeword lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    switch (loss) {
      case Loss::kAwgnMse: s += (y[i] - c[i]) * (y[i] - c[i]); break;
      case Loss::kPoissonMl: s += alpha * c[i] - y[i] * std::log(c[i]); break;
      case Loss::kPoissonMse: {
        const double d = c[i] - y[i] / alpha;
        s += d * d;
        break;
      }
    }
  }
  return s;
}

Selection codebook_denoise(const Vector& y, const Codebook& book, Loss loss, double alpha) {
  if (book.words.empty()) throw Error(ErrorCode::kInvalidCodebook, "codebook is empty");
  if (loss == Loss::kPoissonMl) {
    if (!(alpha > 0)) throw Error(ErrorCode::kInvalidArgument, "Poisson loss needs alpha > 0");
    for (double v : y) {
      if (v < 0) throw Error(ErrorCode::kInvalidArgument, "Poisson observations must be non-negative");
    }
    for (const auto& w : book.words) {
      for (double v : w) {
        if (!(v > 0)) throw Error(ErrorCode::kInvalidCodebook, "Poisson likelihood needs positive codewords");
      }
    }
  }
  Selection best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < book.words.size(); ++i) {
    const double l = codeword_loss(y, book.words[i], loss, alpha);
    if (l < best_loss) {
      best_loss = l;
      best.index = i;
    }
  }
  best.codeword = book.words[best.index];
  return best;
}

// ---- SparseCode ----

namespace {

unsigned sparse_bits_for(std::size_t n, std::size_t k, double delta) {
  if (n == 0 || k == 0 || k > n || !(delta > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "sparse code needs 0 < k <= n and delta > 0");
  }
  const double b = std::ceil(0.5 * std::log2(static_cast<double>(k) / (static_cast<double>(n) * delta)));
  return static_cast<unsigned>(std::max(0.0, b));
}

bool next_combination(std::vector<std::size_t>& s, std::size_t n) {
  const std::size_t k = s.size();
  for (std::size_t i = k; i-- > 0;) {
    if (s[i] < n - k + i) {
      ++s[i];
      for (std::size_t j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

SparseCode::SparseCode(std::size_t n, std::size_t k, double delta) : SparseCode(n, k, delta, sparse_bits_for(n, k, delta)) {}

SparseCode::SparseCode(std::size_t n, std::size_t k, double delta, unsigned bits)
    : n_(n), k_(k), delta_(delta), bits_(bits) {
  sparse_bits_for(n, k, delta);
  if (bits > 24) throw Error(ErrorCode::kInvalidArgument, "sparse code bit depth above 24 is not supported");
  const std::size_t count = std::size_t{1} << bits;
  const double cell = 2.0 / static_cast<double>(count);
  for (std::size_t q = 0; q < count; ++q) levels_.push_back(-1.0 + (static_cast<double>(q) + 0.5) * cell);
}

double SparseCode::codeword_count() const {
  double total = 0.0, binom = 1.0;
  const double per = std::ldexp(1.0, static_cast<int>(bits_));
  for (std::size_t j = 0; j <= k_; ++j) {
    total += binom * std::pow(per, static_cast<double>(j));
    binom = binom * static_cast<double>(n_ - j) / static_cast<double>(j + 1);
  }
  return total;
}

double SparseCode::rate() const { return std::log2(codeword_count()); }

double SparseCode::rate_bound() const {
  const double n = static_cast<double>(n_), k = static_cast<double>(k_);
  return k / 2 * std::log2(k / (n * delta_)) + k * std::log2(n / k) + std::log2(k) + k * (std::log2(std::exp(1.0)) + 1);
}

double SparseCode::worst_distortion() const {
  return static_cast<double>(k_) * std::ldexp(1.0, -2 * static_cast<int>(bits_)) / static_cast<double>(n_);
}

std::size_t SparseCode::nearest_level(double v) const {
  const double cell = 2.0 / static_cast<double>(levels_.size());
  const double q = std::floor((v + 1.0) / cell);
  return static_cast<std::size_t>(std::clamp(q, 0.0, static_cast<double>(levels_.size() - 1)));
}

SparseCode::Symbol SparseCode::encode(const Vector& x) const {
  if (x.size() != n_) throw Error(ErrorCode::kShapeMismatch, "signal length differs from code length");
  Symbol s;
  for (std::size_t i = 0; i < n_; ++i) {
    if (std::abs(x[i]) > 1.0) throw Error(ErrorCode::kOutOfRange, "sparse code needs |x_i| <= 1");
    if (x[i] != 0.0) {
      s.support.push_back(i);
      s.levels.push_back(static_cast<std::uint32_t>(nearest_level(x[i])));
    }
  }
  if (s.support.size() > k_) {
    throw Error(ErrorCode::kOutOfRange, "signal has " + std::to_string(s.support.size()) + " nonzeros, code allows " +
                                            std::to_string(k_));
  }
  return s;
}

Vector SparseCode::decode(const Symbol& s) const {
  Vector x(n_, 0.0);
  for (std::size_t j = 0; j < s.support.size(); ++j) x.at(s.support[j]) = levels_.at(s.levels[j]);
  return x;
}

Vector SparseCode::denoise(const Vector& y) const {
  if (y.size() != n_) throw Error(ErrorCode::kShapeMismatch, "observation length differs from code length");
  std::vector<std::pair<double, std::size_t>> gains;
  Vector best(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double l = levels_[nearest_level(y[i])];
    const double gain = y[i] * y[i] - (y[i] - l) * (y[i] - l);
    best[i] = l;
    if (gain > 0) gains.emplace_back(-gain, i);
  }
  const std::size_t keep = std::min(k_, gains.size());
  std::partial_sort(gains.begin(), gains.begin() + static_cast<std::ptrdiff_t>(keep), gains.end());
  Vector x(n_, 0.0);
  for (std::size_t j = 0; j < keep; ++j) x[gains[j].second] = best[gains[j].second];
  return x;
}

Codebook SparseCode::enumerate(std::size_t max_words) const {
  if (codeword_count() > static_cast<double>(max_words)) {
    throw Error(ErrorCode::kInvalidCodebook, "sparse codebook has 2^" + std::to_string(rate()) +
                                                 " words, above the enumeration limit");
  }
  Codebook book{n_, {}};
  const std::size_t levels = levels_.size();
  for (std::size_t j = 0; j <= k_; ++j) {
    std::vector<std::size_t> support(j);
    std::iota(support.begin(), support.end(), std::size_t{0});
    do {
      std::vector<std::size_t> digit(j, 0);
      while (true) {
        Vector w(n_, 0.0);
        for (std::size_t t = 0; t < j; ++t) w[support[t]] = levels_[digit[t]];
        book.words.push_back(std::move(w));
        std::size_t t = j;
        while (t > 0 && ++digit[t - 1] == levels) digit[--t] = 0;
        if (t == 0) break;
      }
    } while (next_combination(support, n_));
  }
  return book;
}

// ---- BlockCode ----

BlockCode::BlockCode(std::size_t n, std::size_t blocks, unsigned bits, double x_min, double x_max)
    : n_(n), blocks_(blocks), x_min_(x_min), x_max_(x_max) {
  if (blocks == 0 || n % blocks != 0) throw Error(ErrorCode::kInvalidArgument, "blocks must divide n");
  if (!(0 < x_min && x_min < x_max && x_max < 1)) {
    throw Error(ErrorCode::kInvalidArgument, "block code needs 0 < x_min < x_max < 1");
  }
  if (bits > 16) throw Error(ErrorCode::kInvalidArgument, "block code bit depth above 16 is not supported");
  const std::size_t count = std::size_t{1} << bits;
  const double cell = (x_max - x_min) / static_cast<double>(count);
  for (std::size_t q = 0; q < count; ++q) levels_.push_back(x_min + (static_cast<double>(q) + 0.5) * cell);
}

double BlockCode::rate() const { return static_cast<double>(blocks_) * std::log2(static_cast<double>(levels_.size())); }

double BlockCode::delta() const {
  const double half = (x_max_ - x_min_) / static_cast<double>(levels_.size()) / 2;
  return half * half;
}

Vector BlockCode::project(const Vector& x) const { return denoise(x, Loss::kAwgnMse); }

Vector BlockCode::denoise(const Vector& y, Loss loss, double alpha) const {
  if (y.size() != n_) throw Error(ErrorCode::kShapeMismatch, "observation length differs from code length");
  const std::size_t m = block_size();
  Vector out(n_);
  for (std::size_t b = 0; b < blocks_; ++b) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = b * m; i < (b + 1) * m; ++i) {
      sum += y[i];
      sum_sq += y[i] * y[i];
    }
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < levels_.size(); ++q) {
      const double c = levels_[q], md = static_cast<double>(m);
      double l = 0.0;
      switch (loss) {
        case Loss::kAwgnMse: l = md * c * c - 2 * c * sum + sum_sq; break;
        case Loss::kPoissonMl: l = md * alpha * c - sum * std::log(c); break;
        case Loss::kPoissonMse: l = md * c * c - 2 * c * sum / alpha + sum_sq / (alpha * alpha); break;
      }
      if (l < best_loss) {
        best_loss = l;
        best = q;
      }
    }
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(b * m), out.begin() + static_cast<std::ptrdiff_t>((b + 1) * m),
              levels_[best]);
  }
  return out;
}

Codebook BlockCode::enumerate(std::size_t max_words) const {
  if (std::pow(static_cast<double>(levels_.size()), static_cast<double>(blocks_)) > static_cast<double>(max_words)) {
    throw Error(ErrorCode::kInvalidCodebook, "block codebook is above the enumeration limit");
  }
  Codebook book{n_, {}};
  std::vector<std::size_t> digit(blocks_, 0);
  const std::size_t m = block_size();
  while (true) {
    Vector w(n_);
    for (std::size_t b = 0; b < blocks_; ++b) {
      std::fill(w.begin() + static_cast<std::ptrdiff_t>(b * m), w.begin() + static_cast<std::ptrdiff_t>((b + 1) * m),
                levels_[digit[b]]);
    }
    book.words.push_back(std::move(w));
    std::size_t t = blocks_;
    while (t > 0 && ++digit[t - 1] == levels_.size()) digit[--t] = 0;
    if (t == 0) break;
  }
  return book;
}

// ---- bounds ----

double failure_ceiling(double eta, double rate) { return std::min(1.0, std::exp2(-eta * rate + 2)); }

namespace {

void check_bound_params(const BoundParams& p, bool poisson) {
  if (p.n == 0 || p.rate < 0 || p.delta < 0 || !(p.eta > 0 && p.eta < 1) || p.sigma < 0) {
    throw Error(ErrorCode::kInvalidArgument, "bound needs n > 0, R >= 0, delta >= 0, eta in (0,1), sigma >= 0");
  }
  if (poisson && (!(0 < p.x_min && p.x_min < p.x_max && p.x_max < 1) || !(p.alpha > 0))) {
    throw Error(ErrorCode::kInvalidArgument, "Poisson bounds need 0 < x_min < x_max < 1 and alpha > 0");
  }
}

}  // namespace

Bound bound_thm1(const BoundParams& p) {
  check_bound_params(p, false);
  const double n = static_cast<double>(p.n);
  return {std::sqrt(p.delta) + 2 * p.sigma * std::sqrt(2 * std::log(2.0) * p.rate / n) * (1 + 2 * std::sqrt(p.eta)),
          failure_ceiling(p.eta, p.rate)};
}

double thm2_c1(const BoundParams& p) { return std::pow(p.x_max, 5) / (p.x_min * p.x_min); }

double thm2_c2(const BoundParams& p) {
  const double beta = std::log(1.0 / p.x_min);
  return p.x_max * p.x_max / std::pow(p.x_min, 3) * beta * std::sqrt(4 / std::log(2.0)) *
         (std::sqrt(1 + p.eta) + std::sqrt(p.eta));
}

Bound bound_thm2(const BoundParams& p) {
  check_bound_params(p, true);
  const double n = static_cast<double>(p.n);
  return {thm2_c1(p) * p.delta + thm2_c2(p) * std::sqrt(p.rate / (n * p.alpha)), failure_ceiling(p.eta, p.rate)};
}

double thm4_c(double eta) { return 4 * std::sqrt(std::log(2.0)) * (std::sqrt(1 + eta) + std::sqrt(eta) + 1); }

Bound bound_thm4(const BoundParams& p) {
  check_bound_params(p, true);
  const double n = static_cast<double>(p.n);
  return {p.delta + thm4_c(p.eta) * std::sqrt(p.rate / (n * p.alpha)), failure_ceiling(p.eta, p.rate)};
}

// ---- Monte Carlo ----

bool ValidationResult::within_ceiling() const { return empirical_rate <= ceiling + 3 * std_error; }

ValidationResult validate_theorem(const ValidationConfig& cfg) {
  if (cfg.trials == 0) throw Error(ErrorCode::kInvalidArgument, "validation needs at least one trial");
  if (cfg.theorem != 1 && cfg.theorem != 2 && cfg.theorem != 4) {
    throw Error(ErrorCode::kInvalidArgument, "theorem must be 1, 2 or 4");
  }
  ValidationResult res;
  res.theorem = cfg.theorem;
  res.n = cfg.n;
  res.eta = cfg.eta;
  res.trials = cfg.trials;
  std::vector<double> errors(cfg.trials);
  const auto trials = static_cast<std::ptrdiff_t>(cfg.trials);

  if (cfg.theorem == 1) {
    const double delta = cfg.delta > 0 ? cfg.delta : 1.0 / static_cast<double>(cfg.n);
    const SparseCode code = cfg.sparse_bits ? SparseCode(cfg.n, cfg.k, delta, cfg.sparse_bits)
                                            : SparseCode(cfg.n, cfg.k, delta);
    if (code.worst_distortion() > delta * (1 + 1e-12)) {
      throw Error(ErrorCode::kInvalidCodebook, "sparse code distortion exceeds the claimed delta");
    }
    BoundParams p;
    p.n = cfg.n;
    p.rate = code.rate();
    p.delta = delta;
    p.eta = cfg.eta;
    p.sigma = cfg.sigma;
    const Bound b = bound_thm1(p);
    res.rate = p.rate;
    res.delta = delta;
    res.bound = b.value;
    res.ceiling = b.failure_prob;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < trials; ++t) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
      std::vector<std::size_t> pool(cfg.n);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      Vector x(cfg.n, 0.0);
      for (std::size_t j = 0; j < cfg.k; ++j) {
        const std::size_t pick = j + rng.below(cfg.n - j);
        std::swap(pool[j], pool[pick]);
        x[pool[j]] = rng.uniform(-1.0, 1.0);
      }
      Vector y = x;
      for (double& v : y) v += cfg.sigma * rng.normal();
      const Vector xhat = code.denoise(y);
      double e = 0.0;
      for (std::size_t i = 0; i < cfg.n; ++i) e += (x[i] - xhat[i]) * (x[i] - xhat[i]);
      errors[static_cast<std::size_t>(t)] = std::sqrt(e / static_cast<double>(cfg.n));
    }
  } else {
    const BlockCode code(cfg.n, cfg.blocks, cfg.block_bits, cfg.x_min, cfg.x_max);
    if (cfg.delta > 0 && code.delta() > cfg.delta * (1 + 1e-12)) {
      throw Error(ErrorCode::kInvalidCodebook, "block code distortion exceeds the claimed delta");
    }
    BoundParams p;
    p.n = cfg.n;
    p.rate = code.rate();
    p.delta = code.delta();
    p.eta = cfg.eta;
    p.alpha = cfg.alpha;
    p.x_min = cfg.x_min;
    p.x_max = cfg.x_max;
    const Bound b = cfg.theorem == 2 ? bound_thm2(p) : bound_thm4(p);
    const Loss loss = cfg.theorem == 2 ? Loss::kPoissonMl : Loss::kPoissonMse;
    res.rate = p.rate;
    res.delta = p.delta;
    res.bound = b.value;
    res.ceiling = b.failure_prob;
    const std::size_t m = code.block_size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < trials; ++t) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
      Vector x(cfg.n);
      for (std::size_t b0 = 0; b0 < code.blocks(); ++b0) {
        const double v = rng.uniform(cfg.x_min, cfg.x_max);
        std::fill(x.begin() + static_cast<std::ptrdiff_t>(b0 * m), x.begin() + static_cast<std::ptrdiff_t>((b0 + 1) * m),
                  v);
      }
      Vector y(cfg.n);
      for (std::size_t i = 0; i < cfg.n; ++i) y[i] = static_cast<double>(rng.poisson(cfg.alpha * x[i]));
      const Vector xhat = code.denoise(y, loss, cfg.alpha);
      double e = 0.0;
      for (std::size_t i = 0; i < cfg.n; ++i) e += (x[i] - xhat[i]) * (x[i] - xhat[i]);
      errors[static_cast<std::size_t>(t)] = e / static_cast<double>(cfg.n);
    }
  }

  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    res.max_error = std::max(res.max_error, e);
    if (e > res.bound) ++res.violations;
  }
  const double trials_d = static_cast<double>(cfg.trials);
  res.mean_error = sum / trials_d;
  res.empirical_rate = static_cast<double>(res.violations) / trials_d;
  res.std_error = std::sqrt(res.ceiling * (1 - res.ceiling) / trials_d);
  return res;
}

// ---- Poisson lemmas ----

double poisson_kl(double a1, double a2) {
  if (!(a1 > 0 && a2 > 0)) throw Error(ErrorCode::kInvalidArgument, "Poisson rates must be positive");
  return a2 - a1 + a1 * std::log(a1 / a2);
}

Sandwich kl_sandwich(double a1, double a2, double a_min, double a_max) {
  if (!(0 < a_min && a_min <= std::min(a1, a2) && std::max(a1, a2) <= a_max)) {
    throw Error(ErrorCode::kInvalidArgument, "rates must lie within [a_min, a_max]");
  }
  Sandwich s;
  const double quad = (a2 - a1) * (a2 - a1) / (2 * a1);
  const double ratio = a_min / a_max;
  s.kl = poisson_kl(a1, a2);
  s.lower = ratio * ratio * quad;
  s.upper = quad / (ratio * ratio);
  // Absolute slack for cancellation in a2 - a1 + a1 log(a1 / a2) near a1 = a2.
  const double slack = 1e-12 * std::max({a1, a2, 1.0});
  s.holds = s.lower <= s.kl + slack && s.kl <= s.upper + slack;
  return s;
}

GridSweep kl_sandwich_grid(double lo, double hi, std::size_t steps) {
  if (steps < 2 || !(0 < lo && lo < hi)) throw Error(ErrorCode::kInvalidArgument, "grid needs 0 < lo < hi, steps >= 2");
  GridSweep g;
  for (std::size_t i = 0; i < steps; ++i) {
    const double a1 = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    for (std::size_t j = 0; j < steps; ++j) {
      const double a2 = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(steps - 1);
      for (const auto& s : {kl_sandwich(a1, a2, lo, hi), kl_sandwich(a1, a2, std::min(a1, a2), std::max(a1, a2))}) {
        ++g.checks;
        if (!s.holds) ++g.failures;
      }
    }
  }
  return g;
}

double tail_bound(double sigma2, double w_max, double t) {
  return std::exp(-t * t / (2 * (sigma2 + w_max * t / 3)));
}

bool TailResult::holds() const {
  const double se = std::sqrt(bound * (1 - bound) / static_cast<double>(trials));
  return upper_rate <= bound + 3 * se && lower_rate <= bound + 3 * se;
}

TailResult validate_poisson_tail(const TailConfig& cfg) {
  if (cfg.weights.size() != cfg.means.size() || cfg.weights.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "weights and means must be non-empty and equally long");
  }
  if (cfg.trials == 0) throw Error(ErrorCode::kInvalidArgument, "tail check needs at least one trial");
  TailResult res;
  double centre = 0.0;
  for (std::size_t i = 0; i < cfg.weights.size(); ++i) {
    if (cfg.means[i] < 0) throw Error(ErrorCode::kInvalidArgument, "Poisson means must be non-negative");
    res.sigma2 += cfg.weights[i] * cfg.weights[i] * cfg.means[i];
    res.w_max = std::max(res.w_max, std::abs(cfg.weights[i]));
    centre += cfg.weights[i] * cfg.means[i];
  }
  if (!(res.sigma2 > 0)) throw Error(ErrorCode::kInvalidArgument, "the weighted sum has zero variance");
  const double window = 3 * res.sigma2 / (2 * res.w_max);
  if (!(cfg.t >= 0 && cfg.t <= window)) {
    throw Error(ErrorCode::kOutOfRange, "t = " + std::to_string(cfg.t) + " lies outside [0, " +
                                            std::to_string(window) + "]");
  }
  res.t = cfg.t;
  res.trials = cfg.trials;
  res.bound = tail_bound(res.sigma2, res.w_max, cfg.t);

  std::size_t upper = 0, lower = 0;
  const auto trials = static_cast<std::ptrdiff_t>(cfg.trials);
#pragma omp parallel for schedule(static) reduction(+ : upper, lower)
  for (std::ptrdiff_t t = 0; t < trials; ++t) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
    double s = 0.0;
    for (std::size_t i = 0; i < cfg.weights.size(); ++i) s += cfg.weights[i] * static_cast<double>(rng.poisson(cfg.means[i]));
    if (s >= centre + cfg.t) ++upper;
    if (s <= centre - cfg.t) ++lower;
  }
  res.upper_rate = static_cast<double>(upper) / static_cast<double>(cfg.trials);
  res.lower_rate = static_cast<double>(lower) / static_cast<double>(cfg.trials);
  return res;
}

}  // namespace zsncd::theory

namespace zsncd::theory {

std::vector<TailConfig> lemma2_configurations(std::size_t n, double mean, double t_factor, std::size_t trials,
                                              std::uint64_t seed) {
  if (n == 0 || !(mean > 0) || !(t_factor >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "lemma 2 configurations need n > 0, mean > 0, t_factor >= 0");
  }
  Rng rng(seed, 0x6c656d6d6132ULL);
  std::vector<TailConfig> out(5);
  for (std::size_t i = 0; i < n; ++i) {
    const double ramp = static_cast<double>(i + 1) / static_cast<double>(n);
    out[0].weights.push_back(1.0);
    out[1].weights.push_back(i % 2 ? -1.0 : 1.0);
    out[2].weights.push_back(std::log(1.0 / rng.uniform(0.1, 0.9)));
    out[3].weights.push_back(rng.uniform(-1.0, 1.0));
    out[4].weights.push_back(ramp);
    for (std::size_t c = 0; c < 4; ++c) out[c].means.push_back(mean);
    out[4].means.push_back(mean * 2 * ramp);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    double sigma2 = 0, w_max = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sigma2 += out[c].weights[i] * out[c].weights[i] * out[c].means[i];
      w_max = std::max(w_max, std::abs(out[c].weights[i]));
    }
    out[c].t = std::min(t_factor * std::sqrt(sigma2), 3 * sigma2 / (2 * w_max));
    out[c].trials = trials;
    out[c].seed = seed + c;
  }
  return out;
}

}  // namespace zsncd::theory

#include "zsncd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "zsncd/error.hpp"

namespace zsncd {

void validate(const NoiseModel& model) {
  if (const auto* g = std::get_if<Awgn>(&model)) {
    if (!(g->sigma >= 0.0) || !std::isfinite(g->sigma)) {
      throw Error(ErrorCode::kInvalidArgument, "noise sigma must be finite and non-negative");
    }
  } else if (const auto* p = std::get_if<PoissonNoise>(&model)) {
    if (!(p->alpha > 0.0) || !std::isfinite(p->alpha)) {
      throw Error(ErrorCode::kInvalidArgument, "Poisson alpha must be finite and positive");
    }
  }
}

Image add_awgn(const Image& x, double sigma, Rng& rng) {
  validate(Awgn{sigma});
  Image y = x;
  if (sigma == 0.0) return y;
  for (double& v : y.data()) v += sigma * rng.normal();
  return y;
}

PoissonObservation add_poisson(const Image& x, double alpha, Rng& rng) {
  validate(PoissonNoise{alpha});
  PoissonObservation obs{Image(x.height(), x.width(), x.channels()), Image(x.height(), x.width(), x.channels())};
  const auto src = x.data();
  auto counts = obs.counts.data();
  auto norm = obs.normalized.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0.0) throw Error(ErrorCode::kInvalidArgument, "Poisson noise needs non-negative intensities");
    counts[i] = static_cast<double>(rng.poisson(alpha * src[i]));
    norm[i] = counts[i] / alpha;
  }
  return obs;
}

double estimate_sigma(const Image& y) {
  if (y.height() < 2 || y.width() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "noise estimation needs at least a 2x2 image");
  }
  std::vector<double> detail;
  detail.reserve((y.height() / 2) * (y.width() / 2) * y.channels());
  for (std::size_t r = 0; r + 1 < y.height(); r += 2) {
    for (std::size_t c = 0; c + 1 < y.width(); c += 2) {
      for (std::size_t ch = 0; ch < y.channels(); ++ch) {
        const double d = (y.at(r, c, ch) - y.at(r, c + 1, ch) - y.at(r + 1, c, ch) + y.at(r + 1, c + 1, ch)) / 2.0;
        detail.push_back(std::abs(d));
      }
    }
  }
  const std::size_t n = detail.size();
  std::nth_element(detail.begin(), detail.begin() + n / 2, detail.end());
  double median = detail[n / 2];
  if (n % 2 == 0) {
    median = (median + *std::max_element(detail.begin(), detail.begin() + n / 2)) / 2.0;
  }
  return median / 0.6745;
}

double estimate_alpha(const Image& counts) {
  if (counts.empty()) throw Error(ErrorCode::kInvalidArgument, "empty count image");
  double sum = 0.0;
  for (double v : counts.data()) sum += v;
  return 2.0 * sum / static_cast<double>(counts.size());
}

double residual_threshold(const NoiseModel& model) {
  validate(model);
  if (const auto* g = std::get_if<Awgn>(&model)) {
    if (g->sigma == 0.0) throw Error(ErrorCode::kInvalidArgument, "residual threshold needs sigma > 0");
    return g->sigma * g->sigma;
  }
  return 1.0 / (2.0 * std::get<PoissonNoise>(model).alpha);
}

double threshold_psnr(double tau) { return -10.0 * std::log10(tau); }

void write_counts(const Image& counts, const std::filesystem::path& path) {
  if (counts.channels() != 1 && counts.channels() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "count images have 1 or 3 channels");
  }
  long maxval = 1;
  for (double v : counts.data()) {
    if (v < 0 || v != std::floor(v) || v > 65535) {
      throw Error(ErrorCode::kInvalidArgument, "counts must be integers in [0, 65535]");
    }
    maxval = std::max(maxval, static_cast<long>(v));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << (counts.channels() == 1 ? "P2" : "P3") << "\n" << counts.width() << " " << counts.height() << "\n"
      << maxval << "\n";
  const std::size_t per_row = counts.width() * counts.channels();
  const auto data = counts.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << static_cast<long>(data[i]) << ((i + 1) % per_row == 0 ? "\n" : " ");
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

Image read_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  // Strip comments, then read whitespace-separated tokens.
  std::stringstream clean;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    clean << line << '\n';
  }
  std::string magic;
  long width = 0, height = 0, maxval = 0;
  if (!(clean >> magic >> width >> height >> maxval) || (magic != "P2" && magic != "P3") || width <= 0 ||
      height <= 0) {
    throw Error(ErrorCode::kMalformedHeader, "'" + path.string() + "' is not a plain PGM/PPM count file");
  }
  if (maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::kUnsupportedMaxval, "count file maxval " + std::to_string(maxval) + " is unsupported");
  }
  const std::size_t channels = magic == "P2" ? 1 : 3;
  std::vector<double> data(static_cast<std::size_t>(width * height) * channels);
  for (double& v : data) {
    long c = 0;
    if (!(clean >> c)) throw Error(ErrorCode::kTruncatedPayload, "count file '" + path.string() + "' is truncated");
    if (c < 0 || c > maxval) throw Error(ErrorCode::kMalformedHeader, "count exceeds declared maxval");
    v = static_cast<double>(c);
  }
  return Image(static_cast<std::size_t>(height), static_cast<std::size_t>(width), channels, std::move(data));
}

}  // namespace zsncd

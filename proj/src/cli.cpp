#include "zsncd/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "zsncd/codec.hpp"
#include "zsncd/image.hpp"
#include "zsncd/noise.hpp"
#include "zsncd/parallel.hpp"
#include "zsncd/theory.hpp"
#include "zsncd/trainer.hpp"

namespace zsncd::cli {

namespace {

constexpr double kScale = kIntensityScale;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value report; printed and optionally written to a file.
class Report {
 public:
  template <typename V>
  void add(const std::string& key, const V& value) {
    std::ostringstream s;
    s.precision(10);
    s << value;
    lines_.push_back(key + "=" + s.str());
  }
  void add_fixed(const std::string& key, double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    lines_.push_back(key + "=" + buf);
  }
  void emit(const std::string& path) const {
    for (const auto& l : lines_) std::printf("%s\n", l.c_str());
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
    for (const auto& l : lines_) out << l << '\n';
  }

 private:
  std::vector<std::string> lines_;
};

struct NoiseOptions {
  std::string model = "awgn";
  double sigma = -1.0;  // 0-255 scale; negative: estimate
  double alpha = -1.0;  // negative: estimate from counts
  std::string counts;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Noise model")->check(CLI::IsMember({"awgn", "poisson"}));
    app->add_option("--sigma", sigma, "AWGN standard deviation on the 0-255 scale (negative: estimate)");
    app->add_option("--alpha", alpha, "Poisson photon scale (negative: estimate from --counts)");
    app->add_option("--counts", counts, "Raw Poisson count image (plain PGM/PPM) for estimating alpha");
  }

  NoiseModel resolve(const Image& y, Report& report) const {
    if (model == "awgn") {
      const bool estimated = sigma < 0;
      const double s = estimated ? estimate_sigma(y) : sigma / kScale;
      report.add("model", "awgn");
      report.add("sigma", s * kScale);
      report.add("sigma_source", estimated ? "estimated" : "given");
      return Awgn{s};
    }
    double a = alpha;
    const char* source = "given";
    if (a <= 0) {
      if (counts.empty()) throw UsageError("Poisson model needs --alpha or --counts");
      a = estimate_alpha(read_counts(counts));
      source = "estimated";
    }
    report.add("model", "poisson");
    report.add("alpha", a);
    report.add("alpha_source", source);
    return PoissonNoise{a};
  }
};

struct TrainOptionsCli {
  std::string variant = "conv";
  std::size_t k = 8;
  std::size_t steps = 20000;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  std::string distortion = "mse";
  std::string profile;

  void attach(CLI::App* app) {
    app->add_option("--variant", variant, "Network variant")->check(CLI::IsMember({"conv", "mlp"}));
    app->add_option("--k", k, "Patch size")->check(CLI::IsMember({8, 16}));
    app->add_option("--steps", steps, "Training steps")->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "Patches per minibatch")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--distortion", distortion, "Training distortion")
        ->check(CLI::IsMember({"mse", "poisson-nll"}));
    app->add_option("--profile", profile, "Lambda table: set11 or kodak (default by channel count)");
  }

  TrainConfig resolve(const NoiseModel& noise, Report& report) const {
    TrainConfig cfg;
    cfg.variant = parse_variant(variant);
    cfg.k = k;
    cfg.total_steps = steps;
    cfg.batch = batch;
    cfg.seed = seed;
    cfg.noise = noise;
    cfg.distortion = distortion == "mse" ? Distortion::kMse : Distortion::kPoissonNll;
    report.add("variant", variant);
    report.add("k", k);
    report.add("steps", steps);
    report.add("batch", batch);
    report.add("seed", seed);
    report.add("distortion", distortion);
    return cfg;
  }

  DatasetProfile profile_for(const Image& y) const {
    if (!profile.empty()) return parse_profile(profile);
    return y.channels() == 1 ? DatasetProfile::kSet11Gray : DatasetProfile::kKodakRgb;
  }
};

struct SearchOptions {
  double tol = 0.1;
  double zeta = 0.5;
  std::size_t kmax = 12;
  std::size_t probe_steps = 2000;
  double lambda0 = -1.0;

  void attach(CLI::App* app) {
    app->add_option("--tol", tol, "Stop when |r - tau| / tau is at most this")->check(CLI::PositiveNumber);
    app->add_option("--zeta", zeta, "Lambda step factor in (0, 1)")->check(CLI::Range(0.0, 1.0));
    app->add_option("--kmax", kmax, "Maximum number of probes")->check(CLI::PositiveNumber);
    app->add_option("--probe-steps", probe_steps, "Training steps per probe")->check(CLI::PositiveNumber);
    app->add_option("--lambda0", lambda0, "Initial lambda (negative: profile default)");
  }

  LambdaSearchConfig resolve(double fallback, double tau) const {
    return LambdaSearchConfig{lambda0 > 0 ? lambda0 : fallback, tol, zeta, kmax, tau, probe_steps};
  }
};

std::string sibling(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void add_search_report(Report& report, const LambdaSearchResult& res) {
  for (std::size_t i = 0; i < res.probes.size(); ++i) {
    const auto& p = res.probes[i];
    report.add("probe" + std::to_string(i), "lambda:" + std::to_string(p.lambda) + ",residual:" +
                                                std::to_string(p.residual) + ",beta:" + std::to_string(p.beta));
  }
  report.add("lambda_search_converged", res.converged ? "true" : "false");
}

int cmd_add_noise(const std::string& in, const std::string& out, const NoiseOptions& noise, std::uint64_t seed,
                  const std::string& counts_out) {
  const Image x = read_image(in);
  Rng rng(seed);
  if (noise.model == "awgn") {
    if (noise.sigma < 0) throw UsageError("add-noise needs --sigma >= 0");
    write_image(add_awgn(x, noise.sigma / kScale, rng), out);
  } else {
    if (noise.alpha <= 0) throw UsageError("add-noise needs --alpha > 0");
    const PoissonObservation obs = add_poisson(x, noise.alpha, rng);
    write_image(obs.normalized, out);
    if (!counts_out.empty()) write_counts(obs.counts, counts_out);
  }
  return kOk;
}

int cmd_estimate(const std::string& in, const std::string& model) {
  if (model == "awgn") {
    std::printf("sigma=%.4f\n", estimate_sigma(read_image(in)) * kScale);
  } else {
    std::printf("alpha=%.4f\n", estimate_alpha(read_counts(in)));
  }
  return kOk;
}

struct DenoiseArgs {
  std::string in, out, clean, report_path, loss_csv, checkpoint_out;
  double lambda = -1.0;
  bool auto_lambda = false;
};

int cmd_denoise(const DenoiseArgs& a, const NoiseOptions& noise_opts, const TrainOptionsCli& train_opts,
                const SearchOptions& search) {
  const Image y = read_image(a.in);
  Report report;
  report.add("command", "denoise");
  report.add("in", a.in);
  report.add("out", a.out);
  report.add("threads", thread_count());
  const NoiseModel noise = noise_opts.resolve(y, report);
  TrainConfig cfg = train_opts.resolve(noise, report);

  const double table = default_lambda(train_opts.profile_for(y), noise);
  std::string source = "profile";
  cfg.lambda = table;
  if (a.lambda >= 0) {
    cfg.lambda = a.lambda;
    source = "given";
  }
  if (a.auto_lambda) {
    const LambdaSearchConfig s = search.resolve(a.lambda > 0 ? a.lambda : table, residual_threshold(noise));
    const LambdaSearchResult res = tune_lambda(y, cfg, s);
    add_search_report(report, res);
    if (!res.converged) std::fprintf(stderr, "warning: lambda search did not converge; using best probe\n");
    cfg.lambda = res.lambda;
    source = "searched";
  }
  report.add("lambda", cfg.lambda);
  report.add("lambda_source", source);

  TrainOptions topts;
  topts.loss_csv = a.loss_csv.empty() ? sibling(a.out, "_loss.csv") : a.loss_csv;
  report.add("loss_csv", topts.loss_csv.string());
  const CodecModel<float> model = train(y, cfg, topts);
  if (!a.checkpoint_out.empty()) {
    save_checkpoint(model, a.checkpoint_out);
    report.add("checkpoint", a.checkpoint_out);
  }
  const DenoiseResult res = denoise(y, model, cfg.total_steps);
  write_image(res.estimate, a.out);

  report.add("parameters", model.parameter_count());
  report.add("residual", res.residual);
  report.add("tau", residual_threshold(noise));
  report.add("rate_bits", res.rate_bits_mean);
  if (!a.clean.empty()) {
    const Image clean = read_image(a.clean);
    const MetricReport m = compare(clamp01(res.estimate), clean);
    report.add_fixed("psnr", m.psnr_db, 4);
    report.add_fixed("ssim", m.ssim, 4);
    report.add_fixed("psnr_noisy", psnr(y, clean), 4);
  }
  report.emit(a.report_path.empty() ? sibling(a.out, "_report.txt") : a.report_path);
  return kOk;
}

int cmd_tune(const std::string& in, const NoiseOptions& noise_opts, const TrainOptionsCli& train_opts,
             const SearchOptions& search) {
  const Image y = read_image(in);
  Report report;
  report.add("command", "tune-lambda");
  report.add("in", in);
  report.add("threads", thread_count());
  const NoiseModel noise = noise_opts.resolve(y, report);
  const TrainConfig cfg = train_opts.resolve(noise, report);
  const LambdaSearchConfig s = search.resolve(default_lambda(train_opts.profile_for(y), noise),
                                              residual_threshold(noise));
  report.add("tau", s.tau);
  report.add("lambda0", s.lambda0);
  report.add("tol", s.tol);
  report.add("zeta", s.zeta);
  report.add("kmax", s.k_max);
  report.add("probe_steps", s.probe_steps);
  const LambdaSearchResult res = tune_lambda(y, cfg, s);
  add_search_report(report, res);
  if (!res.converged) std::fprintf(stderr, "warning: lambda search did not converge; using best probe\n");
  report.add("lambda", res.lambda);
  report.emit("");
  return kOk;
}

struct TheoryArgs {
  std::string theorem = "1";
  std::size_t n = 64;
  std::size_t k = 4;
  std::vector<double> eta{0.5};
  std::vector<double> sigma{0.1};
  std::vector<double> alpha{25.0};
  double delta = 0.0;
  double x_min = 0.1, x_max = 0.9;
  std::size_t blocks = 4;
  unsigned block_bits = 3;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::size_t grid = 50;
  double mean = 5.0;
  double t_factor = 1.0;
  std::string csv_out;
};

int cmd_theory(const TheoryArgs& a) {
  std::ostringstream csv;
  bool all_hold = true;
  if (a.theorem == "lemma1") {
    const auto g = theory::kl_sandwich_grid(a.x_min, a.x_max, a.grid);
    csv << "lemma,lo,hi,grid,checks,failures\n";
    csv << "1," << a.x_min << ',' << a.x_max << ',' << a.grid << ',' << g.checks << ',' << g.failures << '\n';
    all_hold = g.failures == 0;
  } else if (a.theorem == "lemma2") {
    csv << "config,n,sigma2,w_max,t,bound,upper_rate,lower_rate,trials,holds\n";
    const auto configs = theory::lemma2_configurations(a.n, a.mean, a.t_factor, a.trials, a.seed);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto r = theory::validate_poisson_tail(configs[c]);
      csv << c << ',' << a.n << ',' << r.sigma2 << ',' << r.w_max << ',' << r.t << ',' << r.bound << ','
          << r.upper_rate << ',' << r.lower_rate << ',' << r.trials << ',' << (r.holds() ? 1 : 0) << '\n';
      all_hold = all_hold && r.holds();
    }
  } else {
    const int thm = std::stoi(a.theorem);
    csv << "theorem,eta,R,n,delta,sigma,alpha,trials,violations,empirical_rate,ceiling,std_error,bound,mean_error,"
           "max_error,within_ceiling\n";
    const std::vector<double>& levels = thm == 1 ? a.sigma : a.alpha;
    for (double eta : a.eta) {
      for (double level : levels) {
        theory::ValidationConfig cfg;
        cfg.theorem = thm;
        cfg.n = a.n;
        cfg.k = a.k;
        cfg.delta = a.delta;
        cfg.eta = eta;
        cfg.sigma = level;
        cfg.alpha = level;
        cfg.x_min = a.x_min;
        cfg.x_max = a.x_max;
        cfg.blocks = a.blocks;
        cfg.block_bits = a.block_bits;
        cfg.trials = a.trials;
        cfg.seed = a.seed;
        const auto r = theory::validate_theorem(cfg);
        csv << thm << ',' << eta << ',' << r.rate << ',' << r.n << ',' << r.delta << ','
            << (thm == 1 ? level : 0.0) << ',' << (thm == 1 ? 0.0 : level) << ',' << r.trials << ','
            << r.violations << ',' << r.empirical_rate << ',' << r.ceiling << ',' << r.std_error << ',' << r.bound
            << ',' << r.mean_error << ',' << r.max_error << ',' << (r.within_ceiling() ? 1 : 0) << '\n';
        all_hold = all_hold && r.within_ceiling();
      }
    }
  }
  std::printf("%s", csv.str().c_str());
  if (!a.csv_out.empty()) {
    std::ofstream out(a.csv_out, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open '" + a.csv_out + "' for writing");
    out << csv.str();
  }
  if (!all_hold) std::fprintf(stderr, "warning: some cells exceed their bound\n");
  return kOk;
}

int cmd_metrics(const std::string& a, const std::string& b) {
  const MetricReport m = compare(read_image(a), read_image(b));
  std::printf("psnr=%.2f ssim=%.4f\n", m.psnr_db, m.ssim);
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo:
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kUnsupportedMaxval:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kTruncatedCheckpoint:
      return kIoFailure;
    case ErrorCode::kTrainingDiverged:
      return kDiverged;
    default:
      return kUsage;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Zero-shot image denoising by neural compression, plus a lossy-code theory lab"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file of default flag values");

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0: ZSNCD_THREADS or all cores)");

  NoiseOptions noise;
  TrainOptionsCli train_opts;
  SearchOptions search;
  std::string in, out, counts_out;
  std::uint64_t seed = 0;

  auto* add_noise = app.add_subcommand("add-noise", "Corrupt an image with AWGN or Poisson noise");
  add_noise->add_option("--in", in, "Clean input image (PGM/PPM)")->required();
  add_noise->add_option("--out", out, "Noisy output image")->required();
  add_noise->add_option("--model", noise.model, "Noise model")->check(CLI::IsMember({"awgn", "poisson"}));
  add_noise->add_option("--sigma", noise.sigma, "AWGN standard deviation on the 0-255 scale");
  add_noise->add_option("--alpha", noise.alpha, "Poisson photon scale");
  add_noise->add_option("--seed", seed, "Random seed");
  add_noise->add_option("--counts-out", counts_out, "Also write raw Poisson counts (plain PGM/PPM)");

  std::string est_model = "awgn";
  auto* estimate = app.add_subcommand("estimate-noise", "Estimate sigma (0-255 scale) or alpha");
  estimate->add_option("--in", in, "Noisy image, or raw counts for poisson-counts")->required();
  estimate->add_option("--model", est_model, "What to estimate")
      ->check(CLI::IsMember({"awgn", "poisson-counts"}));

  DenoiseArgs dn;
  auto* denoise_cmd = app.add_subcommand("denoise", "Train on one noisy image and write the estimate");
  denoise_cmd->add_option("--in", dn.in, "Noisy input image")->required();
  denoise_cmd->add_option("--out", dn.out, "Denoised output image")->required();
  noise.attach(denoise_cmd);
  train_opts.attach(denoise_cmd);
  search.attach(denoise_cmd);
  denoise_cmd->add_option("--lambda", dn.lambda, "Rate weight (negative: profile default)");
  denoise_cmd->add_flag("--auto-lambda", dn.auto_lambda, "Search lambda against the residual threshold first");
  denoise_cmd->add_option("--clean", dn.clean, "Clean reference for PSNR/SSIM in the report");
  denoise_cmd->add_option("--report", dn.report_path, "Report path (default <out>_report.txt)");
  denoise_cmd->add_option("--loss-csv", dn.loss_csv, "Loss curve path (default <out>_loss.csv)");
  denoise_cmd->add_option("--checkpoint-out", dn.checkpoint_out, "Save the trained model");

  auto* tune = app.add_subcommand("tune-lambda", "Search lambda so the residual meets the noise threshold");
  tune->add_option("--in", in, "Noisy input image")->required();
  noise.attach(tune);
  train_opts.attach(tune);
  search.attach(tune);

  TheoryArgs th;
  auto* theory_cmd = app.add_subcommand("theory-validate", "Monte Carlo checks of the denoising bounds");
  theory_cmd->add_option("--theorem", th.theorem, "Which result to check")
      ->check(CLI::IsMember({"1", "2", "4", "lemma1", "lemma2"}));
  theory_cmd->add_option("--n", th.n, "Signal length")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--k", th.k, "Sparsity (theorem 1)")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--eta", th.eta, "One or more eta values in (0, 1)");
  theory_cmd->add_option("--sigma", th.sigma, "One or more noise levels on the [0, 1] scale (theorem 1)");
  theory_cmd->add_option("--alpha", th.alpha, "One or more photon scales (theorems 2, 4)");
  theory_cmd->add_option("--delta", th.delta, "Distortion target (0: 1/n)");
  theory_cmd->add_option("--x-min", th.x_min, "Lower intensity bound, also the lemma 1 grid start");
  theory_cmd->add_option("--x-max", th.x_max, "Upper intensity bound, also the lemma 1 grid end");
  theory_cmd->add_option("--blocks", th.blocks, "Constant blocks in the Poisson code");
  theory_cmd->add_option("--block-bits", th.block_bits, "Bits per block in the Poisson code");
  theory_cmd->add_option("--trials", th.trials, "Monte Carlo trials per cell")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--seed", th.seed, "Random seed");
  theory_cmd->add_option("--grid", th.grid, "Lemma 1 grid points per axis");
  theory_cmd->add_option("--mean", th.mean, "Lemma 2 Poisson mean");
  theory_cmd->add_option("--t-factor", th.t_factor, "Lemma 2 deviation in units of sigma_n");
  theory_cmd->add_option("--csv-out", th.csv_out, "Also write the CSV table here");

  std::string ma, mb;
  auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  metrics->add_option("--a", ma, "First image")->required();
  metrics->add_option("--b", mb, "Second image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (threads <= 0) {
      if (const char* env = std::getenv("ZSNCD_THREADS")) threads = std::atoi(env);
    }
    if (threads > 0) set_thread_count(threads);

    if (*add_noise) return cmd_add_noise(in, out, noise, seed, counts_out);
    if (*estimate) return cmd_estimate(in, est_model);
    if (*denoise_cmd) return cmd_denoise(dn, noise, train_opts, search);
    if (*tune) return cmd_tune(in, noise, train_opts, search);
    if (*theory_cmd) return cmd_theory(th);
    if (*metrics) return cmd_metrics(ma, mb);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", to_string(e.code()), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}

}  // namespace zsncd::cli

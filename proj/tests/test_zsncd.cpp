#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "support/gradcheck.hpp"
#include "zsncd/error.hpp"
#include "zsncd/image.hpp"
#include "zsncd/trainer.hpp"

using namespace zsncd;
using zsncd::testing::numeric_gradient;
using zsncd::testing::probe_indices;
using zsncd::testing::relative_error;

namespace {

Image textured(std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        img.at(r, col, ch) = 0.5 + 0.3 * std::sin(0.4 * r + 0.7 * col + ch) * std::cos(0.15 * col);
      }
    }
  }
  return img;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.batch = 8;
  cfg.total_steps = 20;
  return cfg;
}

}  // namespace

TEST(Schedule, ConvDecaysAtEightyPercent) {
  TrainConfig cfg;
  EXPECT_EQ(lr_schedule(0, cfg), 5e-3);
  EXPECT_EQ(lr_schedule(15999, cfg), 5e-3);
  EXPECT_EQ(lr_schedule(16000, cfg), 5e-4);
  EXPECT_EQ(lr_schedule(19999, cfg), 5e-4);
  cfg.total_steps = 5000;
  EXPECT_EQ(lr_schedule(3999, cfg), 5e-3);
  EXPECT_EQ(lr_schedule(4000, cfg), 5e-4);
}

TEST(Schedule, MlpIsConstant) {
  TrainConfig cfg;
  cfg.variant = Variant::kMlp;
  for (std::size_t s : {0u, 16000u, 19999u}) EXPECT_EQ(lr_schedule(s, cfg), 1e-3);
}

TEST(Config, Validation) {
  TrainConfig cfg;
  cfg.lambda = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.distortion = Distortion::kPoissonNll;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.noise = PoissonNoise{25};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(DefaultLambda, TabulatedValues) {
  const auto gray = DatasetProfile::kSet11Gray;
  const auto rgb = DatasetProfile::kKodakRgb;
  EXPECT_DOUBLE_EQ(default_lambda(gray, Awgn{15 / 255.0}), 300);
  EXPECT_DOUBLE_EQ(default_lambda(gray, Awgn{25 / 255.0}), 850);
  EXPECT_DOUBLE_EQ(default_lambda(gray, Awgn{50 / 255.0}), 3000);
  EXPECT_DOUBLE_EQ(default_lambda(gray, PoissonNoise{15}), 3000);
  EXPECT_DOUBLE_EQ(default_lambda(gray, PoissonNoise{25}), 1500);
  EXPECT_DOUBLE_EQ(default_lambda(gray, PoissonNoise{50}), 1000);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, Awgn{15 / 255.0}), 75);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, Awgn{25 / 255.0}), 150);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, Awgn{50 / 255.0}), 750);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, PoissonNoise{15}), 750);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, PoissonNoise{25}), 300);
  EXPECT_DOUBLE_EQ(default_lambda(rgb, PoissonNoise{50}), 150);
}

TEST(DefaultLambda, InterpolatesAndClamps) {
  const auto gray = DatasetProfile::kSet11Gray;
  const double mid = default_lambda(gray, Awgn{20 / 255.0});
  EXPECT_GT(mid, 300);
  EXPECT_LT(mid, 850);
  EXPECT_DOUBLE_EQ(default_lambda(gray, Awgn{80 / 255.0}), 3000);
  EXPECT_DOUBLE_EQ(default_lambda(gray, Awgn{5 / 255.0}), 300);
  EXPECT_EQ(parse_profile("kodak"), DatasetProfile::kKodakRgb);
  EXPECT_THROW(parse_profile("bsd"), Error);
}

TEST(LambdaSearch, StopsAtFirstProbeWithinTolerance) {
  LambdaSearchConfig s;
  s.tau = 0.01;
  int calls = 0;
  const auto r = search_lambda([&](double) { ++calls; return 0.0105; }, s);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.lambda, 500.0);
}

TEST(LambdaSearch, SignRuleAndConvergence) {
  LambdaSearchConfig s;
  s.tau = 0.01;
  // Residual grows with lambda and crosses tau at lambda = 2000.
  const auto oracle = [](double lambda) { return 0.01 * std::sqrt(lambda / 2000.0); };
  const auto r = search_lambda(oracle, s);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(std::abs(r.probes.back().beta), s.tol);
  for (std::size_t i = 0; i + 1 < r.probes.size(); ++i) {
    const auto& p = r.probes[i];
    const double step = 1 + s.zeta * std::abs(p.beta);
    EXPECT_DOUBLE_EQ(r.probes[i + 1].lambda, p.beta > 0 ? p.lambda / step : p.lambda * step);
    EXPECT_DOUBLE_EQ(p.beta, (p.residual - s.tau) / s.tau);
  }
  EXPECT_GT(r.lambda, 500.0);
}

TEST(LambdaSearch, OvershootComesBack) {
  LambdaSearchConfig s;
  s.tau = 0.01;
  s.lambda0 = 50000;
  const auto r = search_lambda([](double lambda) { return 0.01 * std::sqrt(lambda / 2000.0); }, s);
  ASSERT_GE(r.probes.size(), 2u);
  EXPECT_GT(r.probes[0].beta, 0);
  EXPECT_LT(r.probes[1].lambda, r.probes[0].lambda);
}

TEST(LambdaSearch, ExhaustionReturnsClosestProbe) {
  LambdaSearchConfig s;
  s.tau = 0.01;
  s.k_max = 5;
  const auto r = search_lambda([](double lambda) { return 0.03 + 1e-6 * lambda; }, s);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.probes.size(), 5u);
  double best = std::numeric_limits<double>::infinity();
  double best_lambda = 0;
  for (const auto& p : r.probes) {
    if (std::abs(p.beta) < best) best = std::abs(p.beta), best_lambda = p.lambda;
  }
  EXPECT_EQ(r.lambda, best_lambda);
  s.zeta = 1.5;
  EXPECT_THROW(search_lambda([](double) { return 0.0; }, s), Error);
}

TEST(PatchLoss, MseValueMatchesDefinition) {
  TrainConfig cfg = small_config();
  cfg.lambda = 7.0;
  CodecModel<double> model(cfg.codec(1), 3);
  Rng rng(1);
  Tensor<double> patches(model.patch_shape(3));
  for (auto& v : patches.values()) v = rng.uniform();
  Tensor<double> noise(model.latent_shape(3));
  for (auto& v : noise.values()) v = rng.uniform(-0.5, 0.5);

  const auto loss = patch_loss(model, patches, noise, cfg, false);
  Tensor<double> z = model.encode(patches);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += noise[i];
  const auto rec = model.decode(z);
  double d = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) d += 255.0 * 255.0 * (rec[i] - patches[i]) * (rec[i] - patches[i]);
  EXPECT_NEAR(loss.distortion, d / 3, 1e-9 * d);
  EXPECT_NEAR(loss.bits, model.density().bits(z) / 3, 1e-9);
  EXPECT_NEAR(loss.total, loss.distortion + 7.0 * loss.bits, 1e-9 * loss.total);
}

TEST(PatchLoss, PoissonValueMatchesDefinition) {
  TrainConfig cfg = small_config();
  cfg.noise = PoissonNoise{20.0};
  cfg.distortion = Distortion::kPoissonNll;
  cfg.lambda = 2.0;
  CodecModel<double> model(cfg.codec(1), 4);
  Rng rng(2);
  Tensor<double> patches(model.patch_shape(2));
  for (auto& v : patches.values()) v = static_cast<double>(rng.poisson(10.0)) / 20.0;
  const Tensor<double> noise(model.latent_shape(2));
  const auto loss = patch_loss(model, patches, noise, cfg, false);
  const auto rec = model.decode(model.encode(patches));
  double d = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    d += 20.0 * rec[i] - 20.0 * patches[i] * std::log(std::max(rec[i], kPoissonFloor));
  }
  EXPECT_NEAR(loss.distortion, d / 2, 1e-9 * std::abs(d));
}

TEST(PatchLoss, GradientCheck) {
  for (const bool poisson : {false, true}) {
    TrainConfig cfg = small_config();
    cfg.hidden = 6;
    cfg.lambda = 3.0;
    if (poisson) {
      cfg.noise = PoissonNoise{30.0};
      cfg.distortion = Distortion::kPoissonNll;
    }
    CodecModel<double> model(cfg.codec(1), 5);
    // Keep reconstructions clear of the likelihood floor, where the
    // objective has a kink.
    model.decoder().parameters().back()->value.fill(0.5);
    Rng rng(3);
    Tensor<double> patches(model.patch_shape(2));
    for (auto& v : patches.values()) v = 0.2 + 0.6 * rng.uniform();
    Tensor<double> noise(model.latent_shape(2));
    for (auto& v : noise.values()) v = rng.uniform(-0.5, 0.5);
    model.zero_grad();
    patch_loss(model, patches, noise, cfg, true);
    auto f = [&] { return patch_loss(model, patches, noise, cfg, false).total; };
    for (auto* p : model.parameters()) {
      const auto idx = probe_indices(p->value.size(), 8);
      std::vector<double> a;
      for (auto i : idx) a.push_back(p->grad[i]);
      EXPECT_LT(relative_error(a, numeric_gradient(f, p->value.data(), idx)), 1e-5) << poisson << ' ' << p->name;
    }
  }
}

TEST(Train, DeterministicForSeed) {
  const Image y = textured(24, 24, 1);
  const auto cfg = small_config();
  EXPECT_TRUE(same_parameters(train(y, cfg), train(y, cfg)));
  auto other = cfg;
  other.seed = 1;
  EXPECT_FALSE(same_parameters(train(y, cfg), train(y, other)));
}

TEST(Train, LossCsvHasOneRowPerStep) {
  const auto path = std::filesystem::temp_directory_path() / "zsncd_loss.csv";
  TrainOptions opts;
  opts.loss_csv = path;
  std::size_t calls = 0;
  opts.on_step = [&](const StepRecord& r) { EXPECT_EQ(r.step, calls++); };
  train(textured(16, 16, 1), small_config(), opts);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,distortion,rate_bits,lr");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 20u);
  EXPECT_EQ(calls, 20u);
}

TEST(Train, LossDecreases) {
  auto cfg = small_config();
  cfg.total_steps = 400;
  cfg.lambda = 10.0;
  std::vector<double> totals;
  TrainOptions opts;
  opts.on_step = [&](const StepRecord& r) { totals.push_back(r.distortion + cfg.lambda * r.bits); };
  train(textured(32, 32, 1), cfg, opts);
  auto window_mean = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 50; ++i) s += totals[i];
    return s / 50;
  };
  double prev = window_mean(0);
  for (std::size_t w = 50; w + 50 <= totals.size(); w += 50) {
    const double cur = window_mean(w);
    EXPECT_LE(cur, prev * 1.05) << w;
    prev = std::min(prev, cur);
  }
  EXPECT_LT(window_mean(350), 0.5 * window_mean(0));
}

TEST(Train, ZeroLambdaFitsSinglePatch) {
  const Image y = textured(8, 8, 1);
  auto cfg = small_config();
  cfg.hidden = 32;
  cfg.lambda = 0.0;
  cfg.total_steps = 600;
  const auto model = train(y, cfg);
  const auto r = denoise(y, model);
  EXPECT_LT(r.residual, 1e-3);
}

TEST(Train, HugeLambdaCollapsesRate) {
  const Image y = textured(32, 32, 1);
  auto cfg = small_config();
  cfg.total_steps = 300;
  cfg.lambda = 1e6;
  const auto r = denoise(y, train(y, cfg));
  EXPECT_LT(r.rate_bits_mean, 1.0);
  auto spread = [](const Image& img) {
    double mean = 0, sq = 0;
    for (double v : img.data()) mean += v;
    mean /= static_cast<double>(img.size());
    for (double v : img.data()) sq += (v - mean) * (v - mean);
    return std::sqrt(sq / static_cast<double>(img.size()));
  };
  EXPECT_LT(spread(r.estimate), 0.1 * spread(y));
}

TEST(Train, NonFiniteLossRaisesDivergence) {
  Image y = textured(16, 16, 1);
  for (auto& v : y.data()) v = std::numeric_limits<double>::quiet_NaN();
  try {
    train(y, small_config());
    ADD_FAILURE();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingDiverged);
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Train, WarmStartShapeMismatch) {
  const auto cfg = small_config();
  const auto model = train(textured(16, 16, 1), cfg);
  TrainOptions opts;
  opts.init = &model;
  EXPECT_THROW(train(textured(16, 16, 3), cfg, opts), Error);
}

TEST(Denoise, UntrainedModelIsFinite) {
  const Image y = textured(20, 21, 3);
  const CodecModel<float> model({Variant::kConv, 8, 3, 16}, 0);
  const auto r = denoise(y, model);
  ASSERT_TRUE(r.estimate.same_shape(y));
  for (double v : r.estimate.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(r.rate_bits_mean, 0.0);
  EXPECT_THROW(denoise(textured(20, 20, 1), model), Error);
}

TEST(TuneLambda, ProbesFollowSearch) {
  const Image y = textured(24, 24, 1);
  auto cfg = small_config();
  LambdaSearchConfig s;
  s.tau = 1e-3;
  s.k_max = 3;
  s.probe_steps = 10;
  std::vector<LambdaProbe> seen;
  const auto r = tune_lambda(y, cfg, s, [&](const LambdaProbe& p) { seen.push_back(p); });
  EXPECT_EQ(seen.size(), r.probes.size());
  EXPECT_EQ(seen.front().lambda, 500.0);
}

// Serial reference kernels against the OpenMP layer path on the shapes the
// codec actually runs. Prints one line per case: timings, speedup and the
// largest absolute difference between the two outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "zsncd/kernels.hpp"
#include "zsncd/layers.hpp"
#include "zsncd/parallel.hpp"

using namespace zsncd;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
  f();
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

Tensor<double> random_tensor(Shape shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

double max_diff(const std::vector<double>& a, const Tensor<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void report(const char* name, double ref_ms, double omp_ms, double diff) {
  std::printf("%-34s reference %9.3f ms  openmp %9.3f ms  speedup %6.2fx  max|diff| %.2e\n", name, ref_ms, omp_ms,
              ref_ms / omp_ms, diff);
}

void bench_conv(const char* name, std::size_t batch, std::size_t hw, std::size_t cin, std::size_t cout, int reps) {
  Rng rng(1);
  Conv2d<double> layer(cin, cout, 3, 2, 1, rng);
  const auto x = random_tensor({batch, hw, hw, cin}, rng);
  const auto g = kernels::conv_geometry(hw, hw, cin, cout, 3, 2, 1);
  std::vector<double> ref(batch * g.out_pixels() * cout);
  const auto& w = layer.parameters()[0].value;
  const auto& b = layer.parameters()[1].value;
  Tensor<double> out;
  const double omp_ms = time_ms([&] { out = layer.forward(x); }, reps);
  const double ref_ms = time_ms([&] { reference::conv2d(x.data(), w.data(), b.data(), ref.data(), batch, g); }, reps);
  report(name, ref_ms, omp_ms, max_diff(ref, out));
}

void bench_convt(const char* name, std::size_t batch, std::size_t hw, std::size_t cin, std::size_t cout, int reps) {
  Rng rng(2);
  ConvTranspose2d<double> layer(cin, cout, 3, 2, 1, 1, rng);
  const auto x = random_tensor({batch, hw, hw, cin}, rng);
  // The reference describes the adjoint geometry: the large side is "in".
  const auto g = kernels::conv_geometry(2 * hw, 2 * hw, cout, cin, 3, 2, 1);
  std::vector<double> ref(batch * g.in_pixels() * cout);
  const auto& w = layer.parameters()[0].value;
  const auto& b = layer.parameters()[1].value;
  Tensor<double> out;
  const double omp_ms = time_ms([&] { out = layer.forward(x); }, reps);
  const double ref_ms =
      time_ms([&] { reference::conv_transpose2d(x.data(), w.data(), b.data(), ref.data(), batch, g); }, reps);
  report(name, ref_ms, omp_ms, max_diff(ref, out));
}

void bench_dense(const char* name, std::size_t batch, std::size_t in, std::size_t out_dim, int reps) {
  Rng rng(3);
  Dense<double> layer(in, out_dim, rng);
  const auto x = random_tensor({batch, in}, rng);
  std::vector<double> ref(batch * out_dim);
  Tensor<double> out;
  const double omp_ms = time_ms([&] { out = layer.forward(x); }, reps);
  const double ref_ms = time_ms(
      [&] {
        reference::dense(x.data(), layer.parameters()[0].value.data(), layer.parameters()[1].value.data(), ref.data(),
                         batch, in, out_dim);
      },
      reps);
  report(name, ref_ms, omp_ms, max_diff(ref, out));
}

void bench_gdn(const char* name, std::size_t pixels, std::size_t ch, int reps) {
  Rng rng(4);
  Gdn<double> layer(ch, false);
  const auto x = random_tensor({pixels, ch}, rng);
  std::vector<double> ref(pixels * ch);
  Tensor<double> out;
  const double omp_ms = time_ms([&] { out = layer.forward(x); }, reps);
  const double ref_ms = time_ms(
      [&] {
        reference::gdn(x.data(), layer.parameters()[0].value.data(), layer.parameters()[1].value.data(), ref.data(),
                       pixels, ch, false);
      },
      reps);
  report(name, ref_ms, omp_ms, max_diff(ref, out));
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  std::printf("threads %d, %d repetitions per case\n", thread_count(), reps);
  bench_conv("conv 8x8x1 -> 4x4x128, batch 32", 32, 8, 1, 128, reps);
  bench_conv("conv 4x4x128 -> 2x2x128, batch 32", 32, 4, 128, 128, reps);
  bench_conv("conv 64x64x3 -> 32x32x128, batch 1", 1, 64, 3, 128, reps);
  bench_convt("convT 2x2x128 -> 4x4x128, batch 32", 32, 2, 128, 128, reps);
  bench_dense("dense 64 -> 1024, batch 32", 32, 64, 1024, reps);
  bench_dense("dense 1024 -> 1024, batch 32", 32, 1024, 1024, reps);
  bench_gdn("gdn 128 channels, 512 pixels", 512, 128, reps);
}

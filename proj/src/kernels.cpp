#include "zsncd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>

#include "zsncd/error.hpp"

namespace zsncd::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

template <typename T>
void gemm_nn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto blocks = static_cast<std::ptrdiff_t>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t r0 = static_cast<std::size_t>(blk) * 4;
    const std::size_t rows = std::min<std::size_t>(4, m - r0);
    if (rows == 4) {
      T* c0 = c + r0 * n;
      T* c1 = c0 + n;
      T* c2 = c1 + n;
      T* c3 = c2 + n;
      const T* a0 = a + r0 * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n;
        const T v0 = a0[p];
        const T v1 = a0[k + p];
        const T v2 = a0[2 * k + p];
        const T v3 = a0[3 * k + p];
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) {
          const T bj = brow[j];
          c0[j] += v0 * bj;
          c1[j] += v1 * bj;
          c2[j] += v2 * bj;
          c3[j] += v3 * bj;
        }
      }
    } else {
      for (std::size_t r = r0; r < r0 + rows; ++r) {
        T* crow = c + r * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = b + p * n;
          const T v = a[r * k + p];
#pragma omp simd
          for (std::size_t j = 0; j < n; ++j) crow[j] += v * brow[j];
        }
      }
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(m); ++r) {
    const T* arow = a + static_cast<std::size_t>(r) * n;
    T* crow = c + static_cast<std::size_t>(r) * k;
    for (std::size_t q = 0; q < k; ++q) {
      const T* brow = b + q * n;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      crow[q] = s;
    }
  }
}

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto blocks = static_cast<std::ptrdiff_t>((k + 3) / 4);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t q0 = static_cast<std::size_t>(blk) * 4;
    const std::size_t cols = std::min<std::size_t>(4, k - q0);
    if (cols == 4) {
      T* c0 = c + q0 * n;
      T* c1 = c0 + n;
      T* c2 = c1 + n;
      T* c3 = c2 + n;
      for (std::size_t r = 0; r < m; ++r) {
        const T* brow = b + r * n;
        const T* arow = a + r * k + q0;
        const T v0 = arow[0];
        const T v1 = arow[1];
        const T v2 = arow[2];
        const T v3 = arow[3];
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) {
          const T bj = brow[j];
          c0[j] += v0 * bj;
          c1[j] += v1 * bj;
          c2[j] += v2 * bj;
          c3[j] += v3 * bj;
        }
      }
    } else {
      for (std::size_t q = q0; q < q0 + cols; ++q) {
        T* crow = c + q * n;
        for (std::size_t r = 0; r < m; ++r) {
          const T* brow = b + r * n;
          const T v = a[r * k + q];
#pragma omp simd
          for (std::size_t j = 0; j < n; ++j) crow[j] += v * brow[j];
        }
      }
    }
  }
}

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_ch, std::size_t out_ch,
                           std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (kernel == 0 || stride == 0 || in_h + 2 * pad < kernel || in_w + 2 * pad < kernel) {
    throw Error(ErrorCode::kShapeMismatch, "convolution window does not fit the input");
  }
  ConvGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.in_ch = in_ch;
  g.out_ch = out_ch;
  g.kernel = kernel;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (in_h + 2 * pad - kernel) / stride + 1;
  g.out_w = (in_w + 2 * pad - kernel) / stride + 1;
  return g;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* images, T* cols, std::size_t batch) {
  const std::size_t rows = batch * g.out_pixels();
  const std::size_t len = g.col_len();
#pragma omp parallel for schedule(static) if (rows * len > kParallelWork)
  for (std::ptrdiff_t row = 0; row < static_cast<std::ptrdiff_t>(rows); ++row) {
    const std::size_t n = static_cast<std::size_t>(row) / g.out_pixels();
    const std::size_t pix = static_cast<std::size_t>(row) % g.out_pixels();
    const std::size_t oh = pix / g.out_w;
    const std::size_t ow = pix % g.out_w;
    const T* img = images + n * g.in_pixels() * g.in_ch;
    T* col = cols + static_cast<std::size_t>(row) * len;
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
        T* dst = col + (kh * g.kernel + kw) * g.in_ch;
        if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
            iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
          std::fill(dst, dst + g.in_ch, T{0});
        } else {
          const T* src = img + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.in_ch;
          std::copy(src, src + g.in_ch, dst);
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* images, std::size_t batch) {
  const std::size_t len = g.col_len();
#pragma omp parallel for schedule(static) if (batch * g.out_pixels() * len > kParallelWork)
  for (std::ptrdiff_t sn = 0; sn < static_cast<std::ptrdiff_t>(batch); ++sn) {
    const auto n = static_cast<std::size_t>(sn);
    T* img = images + n * g.in_pixels() * g.in_ch;
    for (std::size_t pix = 0; pix < g.out_pixels(); ++pix) {
      const std::size_t oh = pix / g.out_w;
      const std::size_t ow = pix % g.out_w;
      const T* col = cols + (n * g.out_pixels() + pix) * len;
      for (std::size_t kh = 0; kh < g.kernel; ++kh) {
        const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.pad);
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t kw = 0; kw < g.kernel; ++kw) {
          const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.pad);
          if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          const T* src = col + (kh * g.kernel + kw) * g.in_ch;
          T* dst = img + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.in_ch;
#pragma omp simd
          for (std::size_t c = 0; c < g.in_ch; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

#define ZSNCD_INSTANTIATE(T)                                                                          \
  template void gemm_nn_acc<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);        \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);            \
  template void gemm_tn_acc<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);        \
  template void im2col<T>(const ConvGeometry&, const T*, T*, std::size_t);                           \
  template void col2im<T>(const ConvGeometry&, const T*, T*, std::size_t);

ZSNCD_INSTANTIATE(float)
ZSNCD_INSTANTIATE(double)
#undef ZSNCD_INSTANTIATE

}  // namespace zsncd::kernels

namespace zsncd::reference {

using kernels::ConvGeometry;

void conv2d(const double* in, const double* weight, const double* bias, double* out, std::size_t batch,
            const ConvGeometry& g) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        for (std::size_t co = 0; co < g.out_ch; ++co) {
          double acc = bias ? bias[co] : 0.0;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
              const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
              if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) continue;
              for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
                const double x = in[((n * g.in_h + ih) * g.in_w + iw) * g.in_ch + ci];
                acc += weight[((kh * g.kernel + kw) * g.in_ch + ci) * g.out_ch + co] * x;
              }
            }
          }
          out[((n * g.out_h + oh) * g.out_w + ow) * g.out_ch + co] = acc;
        }
      }
    }
  }
}

void conv_transpose2d(const double* in, const double* weight, const double* bias, double* out,
                      std::size_t batch, const ConvGeometry& g) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t p = 0; p < g.in_h * g.in_w; ++p) {
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        out[(n * g.in_h * g.in_w + p) * g.in_ch + ci] = bias ? bias[ci] : 0.0;
      }
    }
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
            if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) continue;
            for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
              double acc = 0.0;
              for (std::size_t co = 0; co < g.out_ch; ++co) {
                acc += weight[((kh * g.kernel + kw) * g.in_ch + ci) * g.out_ch + co] *
                       in[((n * g.out_h + oh) * g.out_w + ow) * g.out_ch + co];
              }
              out[((n * g.in_h + ih) * g.in_w + iw) * g.in_ch + ci] += acc;
            }
          }
        }
      }
    }
  }
}

void dense(const double* in, const double* weight, const double* bias, double* out, std::size_t batch,
           std::size_t in_dim, std::size_t out_dim) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = bias ? bias[o] : 0.0;
      for (std::size_t i = 0; i < in_dim; ++i) acc += in[n * in_dim + i] * weight[i * out_dim + o];
      out[n * out_dim + o] = acc;
    }
  }
}

void gdn(const double* in, const double* beta, const double* gamma, double* out, std::size_t pixels,
         std::size_t channels, bool inverse) {
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* x = in + p * channels;
    for (std::size_t i = 0; i < channels; ++i) {
      double norm = beta[i];
      for (std::size_t j = 0; j < channels; ++j) norm += gamma[i * channels + j] * x[j] * x[j];
      const double root = std::sqrt(norm);
      out[p * channels + i] = inverse ? x[i] * root : x[i] / root;
    }
  }
}

}  // namespace zsncd::reference

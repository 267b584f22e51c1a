#pragma once

#include <cstddef>

namespace zsncd::kernels {

// OpenMP kernels shared by every layer. Matrices are row-major. Each output
// element is produced by exactly one thread with a fixed summation order,
// so results are bit-identical for any thread count.

/// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

/// C[M,K] = A[M,N] * B[K,N]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);

/// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

/// Square-kernel 2-D convolution geometry over channels-last images.
struct ConvGeometry {
  std::size_t in_h = 0, in_w = 0, in_ch = 0;
  std::size_t out_h = 0, out_w = 0, out_ch = 0;
  std::size_t kernel = 3, stride = 1, pad = 0;

  std::size_t col_len() const noexcept { return kernel * kernel * in_ch; }
  std::size_t in_pixels() const noexcept { return in_h * in_w; }
  std::size_t out_pixels() const noexcept { return out_h * out_w; }
};

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_ch, std::size_t out_ch,
                           std::size_t kernel, std::size_t stride, std::size_t pad);

/// cols[batch * out_pixels, col_len] from images[batch, in_h, in_w, in_ch];
/// column index is (kh * kernel + kw) * in_ch + ci, zero padded.
template <typename T>
void im2col(const ConvGeometry& g, const T* images, T* cols, std::size_t batch);

/// Adjoint of im2col: scatter-add cols into images (images not cleared).
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* images, std::size_t batch);

}  // namespace zsncd::kernels

namespace zsncd::reference {

// Serial direct-definition kernels in double precision. They share no code
// with the OpenMP path and exist to cross-check it in tests and benchmarks.

/// out[n,oh,ow,co] = bias[co] + sum w[(kh*K+kw)*Cin+ci, co] * in[n, oh*s-p+kh, ow*s-p+kw, ci]
void conv2d(const double* in, const double* weight, const double* bias, double* out, std::size_t batch,
            const kernels::ConvGeometry& g);

/// Transposed convolution: input has g.out_h x g.out_w x g.out_ch pixels and
/// is scattered into g.in_h x g.in_w x g.in_ch; weight is [col_len, out_ch].
void conv_transpose2d(const double* in, const double* weight, const double* bias, double* out,
                      std::size_t batch, const kernels::ConvGeometry& g);

/// y = x W + b with W[in, out].
void dense(const double* in, const double* weight, const double* bias, double* out, std::size_t batch,
           std::size_t in_dim, std::size_t out_dim);

/// Per-pixel divisive normalization over `channels`; inverse multiplies.
void gdn(const double* in, const double* beta, const double* gamma, double* out, std::size_t pixels,
         std::size_t channels, bool inverse);

}  // namespace zsncd::reference

#include "zsncd/layers.hpp"

#include <cmath>

#include "zsncd/kernels.hpp"

namespace zsncd {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv: return "conv";
    case LayerKind::kConvTranspose: return "conv_transpose";
    case LayerKind::kGdn: return "gdn";
    case LayerKind::kIgdn: return "igdn";
    case LayerKind::kRelu: return "relu";
  }
  return "unknown";
}

template <typename T>
std::size_t Layer<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

template <typename T>
void add_bias(Tensor<T>& out, const Tensor<T>& bias) {
  const std::size_t ch = bias.size();
  T* o = out.data();
  const T* b = bias.data();
  for (std::size_t r = 0; r < out.size() / ch; ++r) {
    for (std::size_t c = 0; c < ch; ++c) o[r * ch + c] += b[c];
  }
}

template <typename T>
void accumulate_bias_grad(Tensor<T>& grad, const Tensor<T>& output_grad) {
  const std::size_t ch = grad.size();
  T* g = grad.data();
  const T* og = output_grad.data();
  for (std::size_t r = 0; r < output_grad.size() / ch; ++r) {
    for (std::size_t c = 0; c < ch; ++c) g[c] += og[r * ch + c];
  }
}

}  // namespace

// ---- Dense ----

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, Rng& rng) : in_(in), out_(out) {
  this->params_.emplace_back("weight", glorot_uniform<T>({in, out}, in, out, rng));
  this->params_.emplace_back("bias", Tensor<T>({out}));
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  require(!input.empty() && shape_size(input) == input[0] * in_,
          "dense layer expects " + std::to_string(in_) + " features, got " + shape_string(input));
  return {input[0], out_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input, Tensor<T>*) const {
  const Shape out_shape = output_shape(input.shape());
  Tensor<T> out(out_shape);
  add_bias(out, this->params_[1].value);
  kernels::gemm_nn_acc(input.data(), this->params_[0].value.data(), out.data(), out_shape[0], in_, out_);
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& input, const Tensor<T>& output_grad, const Tensor<T>*) {
  const Shape out_shape = output_shape(input.shape());
  require(output_grad.shape() == out_shape, "dense output gradient has wrong shape");
  const std::size_t batch = out_shape[0];
  auto& weight = this->params_[0];
  auto& bias = this->params_[1];
  kernels::gemm_tn_acc(input.data(), output_grad.data(), weight.grad.data(), batch, in_, out_);
  accumulate_bias_grad(bias.grad, output_grad);
  Tensor<T> grad_in(input.shape());
  kernels::gemm_nt(output_grad.data(), weight.value.data(), grad_in.data(), batch, out_, in_);
  return grad_in;
}

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
                  Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
  const std::size_t k2 = kernel * kernel;
  this->params_.emplace_back("weight", glorot_uniform<T>({k2 * in_ch, out_ch}, k2 * in_ch, k2 * out_ch, rng));
  this->params_.emplace_back("bias", Tensor<T>({out_ch}));
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  require(input.size() == 4 && input[3] == in_ch_,
          "conv expects N x H x W x " + std::to_string(in_ch_) + ", got " + shape_string(input));
  const auto g = kernels::conv_geometry(input[1], input[2], in_ch_, out_ch_, kernel_, stride_, pad_);
  return {input[0], g.out_h, g.out_w, out_ch_};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, Tensor<T>* aux) const {
  const Shape out_shape = output_shape(input.shape());
  const auto g = kernels::conv_geometry(input.dim(1), input.dim(2), in_ch_, out_ch_, kernel_, stride_, pad_);
  const std::size_t rows = input.dim(0) * g.out_pixels();
  Tensor<T> cols({rows, g.col_len()});
  kernels::im2col(g, input.data(), cols.data(), input.dim(0));
  Tensor<T> out(out_shape);
  add_bias(out, this->params_[1].value);
  kernels::gemm_nn_acc(cols.data(), this->params_[0].value.data(), out.data(), rows, g.col_len(), out_ch_);
  if (aux) *aux = std::move(cols);
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& input, const Tensor<T>& output_grad, const Tensor<T>* aux) {
  const Shape out_shape = output_shape(input.shape());
  require(output_grad.shape() == out_shape, "conv output gradient has wrong shape");
  const auto g = kernels::conv_geometry(input.dim(1), input.dim(2), in_ch_, out_ch_, kernel_, stride_, pad_);
  const std::size_t rows = input.dim(0) * g.out_pixels();
  Tensor<T> local;
  const Tensor<T>* cols = aux;
  if (!cols || cols->shape() != Shape{rows, g.col_len()}) {
    local = Tensor<T>({rows, g.col_len()});
    kernels::im2col(g, input.data(), local.data(), input.dim(0));
    cols = &local;
  }
  auto& weight = this->params_[0];
  kernels::gemm_tn_acc(cols->data(), output_grad.data(), weight.grad.data(), rows, g.col_len(), out_ch_);
  accumulate_bias_grad(this->params_[1].grad, output_grad);

  Tensor<T> grad_cols({rows, g.col_len()});
  kernels::gemm_nt(output_grad.data(), weight.value.data(), grad_cols.data(), rows, out_ch_, g.col_len());
  Tensor<T> grad_in(input.shape());
  kernels::col2im(g, grad_cols.data(), grad_in.data(), input.dim(0));
  return grad_in;
}

// ---- ConvTranspose2d ----

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                                    std::size_t pad, std::size_t output_pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad), output_pad_(output_pad) {
  const std::size_t k2 = kernel * kernel;
  this->params_.emplace_back("weight", glorot_uniform<T>({k2 * out_ch, in_ch}, k2 * in_ch, k2 * out_ch, rng));
  this->params_.emplace_back("bias", Tensor<T>({out_ch}));
}

template <typename T>
Shape ConvTranspose2d<T>::output_shape(const Shape& input) const {
  require(input.size() == 4 && input[3] == in_ch_,
          "transposed conv expects N x H x W x " + std::to_string(in_ch_) + ", got " + shape_string(input));
  const std::size_t h = (input[1] - 1) * stride_ + kernel_ + output_pad_;
  const std::size_t w = (input[2] - 1) * stride_ + kernel_ + output_pad_;
  require(h > 2 * pad_ && w > 2 * pad_, "transposed conv padding exceeds output");
  return {input[0], h - 2 * pad_, w - 2 * pad_, out_ch_};
}

namespace {

// The forward convolution this layer is the adjoint of.
kernels::ConvGeometry adjoint_geometry(const Shape& out_shape, const Shape& in_shape, std::size_t kernel,
                                       std::size_t stride, std::size_t pad) {
  const auto g = kernels::conv_geometry(out_shape[1], out_shape[2], out_shape[3], in_shape[3], kernel, stride, pad);
  require(g.out_h == in_shape[1] && g.out_w == in_shape[2], "transposed conv geometry is not invertible");
  return g;
}

}  // namespace

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& input, Tensor<T>*) const {
  const Shape out_shape = output_shape(input.shape());
  const auto g = adjoint_geometry(out_shape, input.shape(), kernel_, stride_, pad_);
  const std::size_t rows = input.dim(0) * g.out_pixels();
  Tensor<T> cols({rows, g.col_len()});
  kernels::gemm_nt(input.data(), this->params_[0].value.data(), cols.data(), rows, in_ch_, g.col_len());
  Tensor<T> out(out_shape);
  add_bias(out, this->params_[1].value);
  kernels::col2im(g, cols.data(), out.data(), input.dim(0));
  return out;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& input, const Tensor<T>& output_grad, const Tensor<T>*) {
  const Shape out_shape = output_shape(input.shape());
  require(output_grad.shape() == out_shape, "transposed conv output gradient has wrong shape");
  const auto g = adjoint_geometry(out_shape, input.shape(), kernel_, stride_, pad_);
  const std::size_t rows = input.dim(0) * g.out_pixels();
  Tensor<T> cols({rows, g.col_len()});
  kernels::im2col(g, output_grad.data(), cols.data(), input.dim(0));
  auto& weight = this->params_[0];
  kernels::gemm_tn_acc(cols.data(), input.data(), weight.grad.data(), rows, g.col_len(), in_ch_);
  accumulate_bias_grad(this->params_[1].grad, output_grad);
  Tensor<T> grad_in(input.shape());
  kernels::gemm_nn_acc(cols.data(), weight.value.data(), grad_in.data(), rows, g.col_len(), in_ch_);
  return grad_in;
}

// ---- GDN / IGDN ----

template <typename T>
Gdn<T>::Gdn(std::size_t channels, bool inverse) : channels_(channels), inverse_(inverse) {
  Tensor<T> gamma({channels, channels});
  for (std::size_t i = 0; i < channels; ++i) gamma[i * channels + i] = static_cast<T>(0.1);
  this->params_.emplace_back("beta", Tensor<T>({channels}, T{1}), static_cast<T>(kGdnBetaMin));
  this->params_.emplace_back("gamma", std::move(gamma), T{0});
}

template <typename T>
Tensor<T> Gdn<T>::norm_pool(const Tensor<T>& input) const {
  const std::size_t rows = input.size() / channels_;
  Tensor<T> squares(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) squares[i] = input[i] * input[i];
  Tensor<T> norm(input.shape());
  kernels::gemm_nt(squares.data(), this->params_[1].value.data(), norm.data(), rows, channels_, channels_);
  const T* beta = this->params_[0].value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) norm[r * channels_ + c] += beta[c];
  }
  return norm;
}

template <typename T>
Tensor<T> Gdn<T>::forward(const Tensor<T>& input, Tensor<T>* aux) const {
  require(input.rank() >= 1 && input.shape().back() == channels_,
          "GDN expects trailing channel axis of " + std::to_string(channels_));
  Tensor<T> norm = norm_pool(input);
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T root = std::sqrt(norm[i]);
    out[i] = inverse_ ? input[i] * root : input[i] / root;
  }
  if (aux) *aux = std::move(norm);
  return out;
}

template <typename T>
Tensor<T> Gdn<T>::backward(const Tensor<T>& input, const Tensor<T>& output_grad, const Tensor<T>* aux) {
  require(output_grad.shape() == input.shape() && input.shape().back() == channels_,
          "GDN output gradient has wrong shape");
  Tensor<T> local;
  const Tensor<T>* norm = aux;
  if (!norm || norm->shape() != input.shape()) {
    local = norm_pool(input);
    norm = &local;
  }
  const std::size_t rows = input.size() / channels_;
  // q_i = g_i x_i u_i^(-3/2) for GDN, g_i x_i u_i^(-1/2) for IGDN.
  Tensor<T> q(input.shape());
  Tensor<T> squares(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T u = (*norm)[i];
    const T root = std::sqrt(u);
    q[i] = inverse_ ? output_grad[i] * input[i] / root : output_grad[i] * input[i] / (u * root);
    squares[i] = input[i] * input[i];
  }
  Tensor<T> coupled(input.shape());
  kernels::gemm_nn_acc(q.data(), this->params_[1].value.data(), coupled.data(), rows, channels_, channels_);

  Tensor<T> grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T root = std::sqrt((*norm)[i]);
    grad_in[i] = inverse_ ? output_grad[i] * root + input[i] * coupled[i]
                          : output_grad[i] / root - input[i] * coupled[i];
  }

  const T half = inverse_ ? T(0.5) : T(-0.5);
  for (auto& v : q.values()) v *= half;
  auto& beta = this->params_[0];
  auto& gamma = this->params_[1];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels_; ++c) beta.grad[c] += q[r * channels_ + c];
  }
  kernels::gemm_tn_acc(q.data(), squares.data(), gamma.grad.data(), rows, channels_, channels_);
  return grad_in;
}

// ---- ReLU ----

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& input, Tensor<T>*) const {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& input, const Tensor<T>& output_grad, const Tensor<T>*) {
  require(output_grad.shape() == input.shape(), "ReLU output gradient has wrong shape");
  Tensor<T> grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > T{0} ? output_grad[i] : T{0};
  return grad_in;
}

// ---- Sequential ----

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& input, Tape<T>* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->aux.assign(layers_.size(), Tensor<T>());
  }
  Tensor<T> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor<T> y = layers_[i]->forward(x, tape ? &tape->aux[i] : nullptr);
    if (tape) {
      tape->inputs.push_back(std::move(x));
    }
    x = std::move(y);
  }
  return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tape<T>& tape, const Tensor<T>& output_grad) {
  if (tape.inputs.size() != layers_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "tape does not match this network");
  }
  Tensor<T> g = output_grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(tape.inputs[i], g, &tape.aux[i]);
  }
  return g;
}

template <typename T>
Shape Sequential<T>::output_shape(Shape input) const {
  for (const auto& l : layers_) input = l->output_shape(input);
  return input;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_) {
    for (auto& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& l : layers_) {
    for (const auto& p : std::as_const(*l).parameters()) out.push_back(&p);
  }
  return out;
}

template <typename T>
std::size_t Sequential<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->parameter_count();
  return n;
}

#define ZSNCD_INSTANTIATE(T)                                                            \
  template class Layer<T>;                                                              \
  template class Dense<T>;                                                              \
  template class Conv2d<T>;                                                             \
  template class ConvTranspose2d<T>;                                                    \
  template class Gdn<T>;                                                                \
  template class Relu<T>;                                                               \
  template class Sequential<T>;                                                         \
  template Tensor<T> glorot_uniform<T>(Shape, std::size_t, std::size_t, Rng&);

ZSNCD_INSTANTIATE(float)
ZSNCD_INSTANTIATE(double)
#undef ZSNCD_INSTANTIATE

}  // namespace zsncd

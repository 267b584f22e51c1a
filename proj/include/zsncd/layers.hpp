#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zsncd/rng.hpp"
#include "zsncd/tensor.hpp"

namespace zsncd {

enum class LayerKind { kDense, kConv, kConvTranspose, kGdn, kIgdn, kRelu };

const char* to_string(LayerKind kind);

/// A trainable tensor with its gradient accumulator. `lower_bound` is the
/// projection floor applied after every optimizer step.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  T lower_bound = -std::numeric_limits<T>::infinity();

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, T floor = -std::numeric_limits<T>::infinity())
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), lower_bound(floor) {}

  void zero_grad() { grad.fill(T{0}); }
};

inline constexpr double kGdnBetaMin = 1e-6;

/// One differentiable stage of the fixed layer set. forward() is pure;
/// backward() returns the input gradient and accumulates parameter
/// gradients into Parameter::grad. Both accept a batch as leading dim.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const noexcept = 0;
  virtual Shape output_shape(const Shape& input) const = 0;

  /// `aux`, when given, receives intermediates that backward() can reuse.
  virtual Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                             const Tensor<T>* aux = nullptr) = 0;

  virtual std::unique_ptr<Layer> clone() const = 0;

  std::span<Parameter<T>> parameters() noexcept { return params_; }
  std::span<const Parameter<T>> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

 protected:
  std::vector<Parameter<T>> params_;
};

/// y = x W + b; W is [in, out]; input flattened to [N, in].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out, Rng& rng);

  LayerKind kind() const noexcept override { return LayerKind::kDense; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const override;
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                     const Tensor<T>* aux = nullptr) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }

 private:
  std::size_t in_, out_;
};

/// Strided cross-correlation on N x H x W x C with zero padding.
/// Weight is [kernel * kernel * in_ch, out_ch].
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng);

  LayerKind kind() const noexcept override { return LayerKind::kConv; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const override;
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                     const Tensor<T>* aux = nullptr) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
};

/// Adjoint of a strided convolution; output extent is
/// (in - 1) * stride - 2 * pad + kernel + output_pad.
/// Weight is [kernel * kernel * out_ch, in_ch].
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
                  std::size_t output_pad, Rng& rng);

  LayerKind kind() const noexcept override { return LayerKind::kConvTranspose; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const override;
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                     const Tensor<T>* aux = nullptr) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_, output_pad_;
};

/// Generalized divisive normalization over the trailing channel axis:
///   y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)
/// The inverse variant multiplies by the same root. Init: beta = 1,
/// gamma = 0.1 I; beta >= kGdnBetaMin and gamma >= 0 after each step.
template <typename T>
class Gdn final : public Layer<T> {
 public:
  Gdn(std::size_t channels, bool inverse);

  LayerKind kind() const noexcept override { return inverse_ ? LayerKind::kIgdn : LayerKind::kGdn; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const override;
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                     const Tensor<T>* aux = nullptr) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Gdn>(*this); }

 private:
  Tensor<T> norm_pool(const Tensor<T>& input) const;

  std::size_t channels_;
  bool inverse_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  LayerKind kind() const noexcept override { return LayerKind::kRelu; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& input, Tensor<T>* aux = nullptr) const override;
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& output_grad,
                     const Tensor<T>* aux = nullptr) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Activations recorded by Sequential::forward for the matching backward.
template <typename T>
struct Tape {
  std::vector<Tensor<T>> inputs;
  std::vector<Tensor<T>> aux;
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const Tensor<T>& input, Tape<T>* tape = nullptr) const;
  /// Consumes a tape from forward(); accumulates parameter gradients.
  Tensor<T> backward(const Tape<T>& tape, const Tensor<T>& output_grad);

  Shape output_shape(Shape input) const;

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace zsncd

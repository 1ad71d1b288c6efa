#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlekit/diffcore/tensor.hpp"

namespace nlekit::diffcore {

enum class Mode { train, eval };

/// Named handle to a tensor owned by a layer. Parameters carry their
/// gradient in the tensor's grad slot after backward().
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  /// Throws a configuration error when `input` is incompatible.
  virtual Shape output_shape(const Shape& input) const = 0;
  /// Takes the input by value so chains can move activations into caches.
  virtual Tensor<T> forward(Tensor<T> input, Mode mode) = 0;
  /// Gradient with respect to the cached forward input. Parameter gradients
  /// are written (not accumulated) into each parameter's grad slot.
  virtual Tensor<T> backward(const Tensor<T>& upstream) = 0;
  virtual std::vector<ParamRef<T>> parameters() { return {}; }
  /// Non-trainable state, e.g. batchnorm running statistics.
  virtual std::vector<ParamRef<T>> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  /// Same configuration, parameters and buffers in long double. Gradient
  /// checks use it to take finite differences below double rounding.
  virtual std::unique_ptr<Layer<long double>> to_extended() const = 0;

 protected:
  [[noreturn]] void shape_error(const std::string& expected, const Shape& actual) const;
  [[noreturn]] void no_cache_error() const;
};

struct Padding2d {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;

  static Padding2d symmetric(std::size_t p) { return {p, p, p, p}; }
  /// Output spatial size equals input size for stride 1; for even kernels the
  /// extra row/column goes after the input.
  static Padding2d same(std::size_t kh, std::size_t kw) {
    return {(kh - 1) / 2, kh - 1 - (kh - 1) / 2, (kw - 1) / 2, kw - 1 - (kw - 1) / 2};
  }
};

/// Stride-1 2-D convolution over [N, C, H, W] with bias.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h = 4, std::size_t kernel_w = 4,
         Padding2d padding = {});

  std::string_view kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override { return {{"weight", &weight_}, {"bias", &bias_}}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Padding2d& padding() const { return padding_; }

 private:
  void im2col(const T* image, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* col) const;
  void col2im(const T* col, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* image) const;

  std::size_t in_channels_, out_channels_, kernel_h_, kernel_w_;
  Padding2d padding_;
  Tensor<T> weight_;  // [out, in, kh, kw]
  Tensor<T> bias_;    // [out]
  std::optional<Tensor<T>> cached_input_;
};

/// Per-channel batch normalization over [N, C, ...].
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.1);

  std::string_view kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override { return {{"scale", &scale_}, {"shift", &shift_}}; }
  std::vector<ParamRef<T>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

  /// When frozen, train-mode forward normalizes with running statistics and
  /// leaves them untouched.
  void set_frozen_stats(bool frozen) { frozen_stats_ = frozen; }
  bool frozen_stats() const { return frozen_stats_; }

 private:
  struct Cache {
    Tensor<T> normalized;
    std::vector<accum_t<T>> inv_std;
    bool batch_stats;
  };

  std::size_t channels_;
  double eps_, momentum_;
  bool frozen_stats_ = false;
  Tensor<T> scale_, shift_, running_mean_, running_var_;
  std::optional<Cache> cache_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  std::string_view kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Relu>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

 private:
  std::optional<Tensor<T>> cached_input_;
};

/// Max pooling over the two trailing axes of [N, C, H, W], no padding.
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(std::size_t window_h, std::size_t window_w, std::size_t stride_h, std::size_t stride_w);

  std::string_view kind() const override { return "maxpool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

  std::size_t window_h() const { return window_h_; }
  std::size_t window_w() const { return window_w_; }

 private:
  std::size_t window_h_, window_w_, stride_h_, stride_w_;
  std::optional<Shape> cached_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::string_view kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

 private:
  std::optional<Shape> cached_shape_;
};

/// Affine map y = W x + b over [N, in].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  std::string_view kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override { return {{"weight", &weight_}, {"bias", &bias_}}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_features_, out_features_;
  Tensor<T> weight_;  // [out, in]
  Tensor<T> bias_;    // [out]
  std::optional<Tensor<T>> cached_input_;
};

/// Row-wise softmax(x / temperature) over the last axis of [N, K].
template <typename T>
class Softmax final : public Layer<T> {
 public:
  explicit Softmax(double temperature = 1.0);

  std::string_view kind() const override { return "softmax"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(Tensor<T> input, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& upstream) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Softmax>(*this); }
  std::unique_ptr<Layer<long double>> to_extended() const override;

  double temperature() const { return temperature_; }

 private:
  double temperature_;
  std::optional<Tensor<T>> cached_output_;
};

/// Ordered chain of named layers.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::string name, std::unique_ptr<Layer<T>> layer);

  Tensor<T> forward(Tensor<T> input, Mode mode);
  Tensor<T> backward(const Tensor<T>& upstream);

  /// Fully qualified "<layer>.<param>" names, in layer order.
  std::vector<ParamRef<T>> parameters();
  std::vector<ParamRef<T>> buffers();
  /// Parameters followed by buffers; what a checkpoint stores.
  std::vector<ParamRef<T>> state();

  /// Propagates `input` through every layer's output_shape(); throws a
  /// configuration error listing all per-layer shapes when the chain breaks.
  std::vector<Shape> shape_chain(const Shape& input) const;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i).second; }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i).second; }
  const std::string& layer_name(std::size_t i) const { return layers_.at(i).first; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

/// Kaiming-uniform (fan-in, ReLU gain) weights, zero biases.
template <typename T>
void kaiming_uniform_init(Tensor<T>& weight, std::size_t fan_in, std::uint64_t seed);

}  // namespace nlekit::diffcore

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bcnn/random.hpp"
#include "bcnn/tensor.hpp"

namespace bcnn {

enum class Mode { Train, Eval };

/// Trainable tensor and the gradient slot filled by backward().
template <typename T>
struct ParamRef {
  std::string name;
  BasicTensor<T>* value;
  BasicTensor<T>* grad;
};

/// Non-trainable state that still belongs in a checkpoint.
template <typename T>
struct BufferRef {
  std::string name;
  BasicTensor<T>* value;
};

/// One differentiable stage. Inputs are batched along axis 0. forward()
/// caches whatever backward() needs; backward() must follow the forward()
/// it differentiates and overwrites (does not accumulate) parameter grads.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) = 0;
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_output) = 0;

  virtual std::vector<ParamRef<T>> parameters() { return {}; }
  virtual std::vector<BufferRef<T>> buffers() { return {}; }

  /// Stochastic layers replay their last draw while frozen (used by
  /// finite-difference checks, which need a deterministic function).
  virtual void freeze_randomness(bool) {}
  /// Identifies the linear piece selected by the last forward() for
  /// piecewise-linear layers (0 for smooth ones). Finite-difference checks
  /// compare it across a stencil to spot steps that straddle a kink.
  virtual std::uint64_t kink_signature() const { return 0; }

  void zero_grad();
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

/// Zero-mean normal entries with stddev sqrt(2 / fan_in).
template <typename T>
BasicTensor<T> he_init(const Shape& shape, std::size_t fan_in, Rng& rng);

/// 3x3 convolution, stride 1, zero "same" padding. NHWC activations,
/// kernel laid out [3, 3, in_channels, filters].
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t filters, Rng& rng);
  Conv2d(BasicTensor<T> kernel, BasicTensor<T> bias);

  std::string_view kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  std::vector<ParamRef<T>> parameters() override;

  std::size_t in_channels() const { return kernel_.dim(2); }
  std::size_t filters() const { return kernel_.dim(3); }

 private:
  BasicTensor<T> kernel_, bias_, kernel_grad_, bias_grad_;
  BasicTensor<T> input_;
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  std::string_view kind() const override { return "maxpool2"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  std::uint64_t kink_signature() const override;

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  std::string_view kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  std::uint64_t kink_signature() const override;

 private:
  BasicTensor<T> input_;
};

/// out = input . W + bias with W laid out [in_features, out_features].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features, Rng& rng);
  Dense(BasicTensor<T> weight, BasicTensor<T> bias);

  std::string_view kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  std::vector<ParamRef<T>> parameters() override;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  BasicTensor<T> weight_, bias_, weight_grad_, bias_grad_;
  BasicTensor<T> input_;
};

/// Normalizes over every axis except the last (features / channels).
/// Train mode uses batch statistics and updates the running estimates;
/// Eval mode applies the running estimates as a fixed affine map.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm(std::size_t features);

  std::string_view kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  std::vector<ParamRef<T>> parameters() override;
  std::vector<BufferRef<T>> buffers() override;

  BasicTensor<T>& gamma() { return gamma_; }
  BasicTensor<T>& beta() { return beta_; }
  BasicTensor<T>& running_mean() { return running_mean_; }
  BasicTensor<T>& running_var() { return running_var_; }

 private:
  BasicTensor<T> gamma_, beta_, gamma_grad_, beta_grad_;
  BasicTensor<T> running_mean_, running_var_;
  // Backward cache (Train mode).
  BasicTensor<T> normalized_;
  std::vector<T> inv_std_;
  bool cached_train_ = false;
};

/// Inverted dropout: Train mode zeroes units with probability 1 - keep_rate
/// and scales survivors by 1 / keep_rate; Eval mode is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double keep_rate, Rng rng);

  std::string_view kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;
  void freeze_randomness(bool frozen) override { frozen_ = frozen; }

  double keep_rate() const { return keep_rate_; }

 private:
  double keep_rate_;
  Rng rng_;
  std::vector<T> mask_;
  bool frozen_ = false;
  bool identity_ = true;
};

/// [N, d1, d2, ...] -> [N, d1 * d2 * ...].
template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::string_view kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;

 private:
  Shape input_shape_;
};

/// Row-wise softmax over the last axis of a [batch, classes] tensor.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  std::string_view kind() const override { return "softmax"; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_output) override;

 private:
  BasicTensor<T> output_;
};

/// Numerically stable row-wise softmax (max subtraction). Non-finite
/// logits are rejected with std::invalid_argument.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace bcnn

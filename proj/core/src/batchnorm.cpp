#include <cmath>
#include <stdexcept>

#include "bcnn/layers.hpp"

namespace bcnn {

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t features)
    : gamma_({features}, T{1}),
      beta_({features}),
      gamma_grad_({features}),
      beta_grad_({features}),
      running_mean_({features}),
      running_var_({features}, T{1}) {}

template <typename T>
Shape BatchNorm<T>::output_shape(const Shape& input) const {
  if (input.empty() || input.back() != gamma_.size()) {
    throw ShapeError("batchnorm expects last axis of " + std::to_string(gamma_.size()) + ", got " +
                     shape_to_string(input));
  }
  return input;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& input, Mode mode) {
  output_shape(input.shape());
  const std::size_t features = gamma_.size();
  const std::size_t rows = input.size() / features;
  BasicTensor<T> out(input.shape());
  inv_std_.assign(features, T{0});
  normalized_ = BasicTensor<T>(input.shape());

  if (mode == Mode::Eval) {
    for (std::size_t f = 0; f < features; ++f) {
      inv_std_[f] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[f]) + kEpsilon));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < features; ++f) {
        const std::size_t i = r * features + f;
        normalized_[i] = (input[i] - running_mean_[f]) * inv_std_[f];
        out[i] = gamma_[f] * normalized_[i] + beta_[f];
      }
    }
    cached_train_ = false;
    return out;
  }

  if (rows < 2) throw std::invalid_argument("batchnorm: Train mode needs at least 2 samples per feature");
  std::vector<double> mean(features, 0.0), var(features, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) mean[f] += static_cast<double>(input[r * features + f]);
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const double d = static_cast<double>(input[r * features + f]) - mean[f];
      var[f] += d * d;
    }
  }
  for (auto& v : var) v /= static_cast<double>(rows);

  for (std::size_t f = 0; f < features; ++f) {
    inv_std_[f] = static_cast<T>(1.0 / std::sqrt(var[f] + kEpsilon));
    const double unbiased = var[f] * static_cast<double>(rows) / static_cast<double>(rows - 1);
    running_mean_[f] = static_cast<T>(kMomentum * static_cast<double>(running_mean_[f]) + (1.0 - kMomentum) * mean[f]);
    running_var_[f] = static_cast<T>(kMomentum * static_cast<double>(running_var_[f]) + (1.0 - kMomentum) * unbiased);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const std::size_t i = r * features + f;
      normalized_[i] = static_cast<T>((static_cast<double>(input[i]) - mean[f])) * inv_std_[f];
      out[i] = gamma_[f] * normalized_[i] + beta_[f];
    }
  }
  cached_train_ = true;
  return out;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::backward(const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != normalized_.shape()) {
    throw ShapeError("batchnorm backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match the last forward");
  }
  const std::size_t features = gamma_.size();
  const std::size_t rows = grad_output.size() / features;
  std::vector<double> sum_g(features, 0.0), sum_gx(features, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const std::size_t i = r * features + f;
      sum_g[f] += static_cast<double>(grad_output[i]);
      sum_gx[f] += static_cast<double>(grad_output[i]) * static_cast<double>(normalized_[i]);
    }
  }
  for (std::size_t f = 0; f < features; ++f) {
    beta_grad_[f] = static_cast<T>(sum_g[f]);
    gamma_grad_[f] = static_cast<T>(sum_gx[f]);
  }

  BasicTensor<T> grad_input(grad_output.shape());
  if (!cached_train_) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < features; ++f) {
        const std::size_t i = r * features + f;
        grad_input[i] = grad_output[i] * gamma_[f] * inv_std_[f];
      }
    }
    return grad_input;
  }
  // dx = gamma * inv_std / R * (R * g - sum(g) - x_hat * sum(g * x_hat))
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const std::size_t i = r * features + f;
      const double scale = static_cast<double>(gamma_[f]) * static_cast<double>(inv_std_[f]);
      const double centered = static_cast<double>(grad_output[i]) - sum_g[f] * inv_rows -
                              static_cast<double>(normalized_[i]) * sum_gx[f] * inv_rows;
      grad_input[i] = static_cast<T>(scale * centered);
    }
  }
  return grad_input;
}

template <typename T>
std::vector<ParamRef<T>> BatchNorm<T>::parameters() {
  return {{"gamma", &gamma_, &gamma_grad_}, {"beta", &beta_, &beta_grad_}};
}

template <typename T>
std::vector<BufferRef<T>> BatchNorm<T>::buffers() {
  return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
}

template class BatchNorm<float>;
template class BatchNorm<double>;

}  // namespace bcnn

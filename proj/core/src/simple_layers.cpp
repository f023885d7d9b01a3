#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bcnn/layers.hpp"

namespace bcnn {

namespace {

// FNV-1a, fed one 64-bit word at a time.
struct Fnv {
  std::uint64_t h = 14695981039346656037ull;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
};

}  // namespace

// ---- MaxPool2 ----

template <typename T>
Shape MaxPool2<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) throw ShapeError("maxpool2 expects NHWC input, got " + shape_to_string(input));
  if (input[1] < 2 || input[2] < 2) {
    throw ShapeError("maxpool2 needs H, W >= 2, got " + shape_to_string(input));
  }
  return {input[0], input[1] / 2, input[2] / 2, input[3]};
}

template <typename T>
BasicTensor<T> MaxPool2<T>::forward(const BasicTensor<T>& input, Mode) {
  const Shape out_shape = output_shape(input.shape());
  BasicTensor<T> out(out_shape);
  const std::size_t n = input.dim(0), w = input.dim(2), c = input.dim(3);
  const std::size_t ho = out_shape[1], wo = out_shape[2];
  const std::size_t in_h = input.dim(1);
  argmax_.resize(out.size());

  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t base = s * in_h * w * c;
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        const std::size_t taps[4] = {base + ((2 * y) * w + 2 * x) * c,
                                     base + ((2 * y) * w + 2 * x + 1) * c,
                                     base + ((2 * y + 1) * w + 2 * x) * c,
                                     base + ((2 * y + 1) * w + 2 * x + 1) * c};
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = taps[0] + ch;
          for (std::size_t t = 1; t < 4; ++t) {
            if (input[taps[t] + ch] > input[best]) best = taps[t] + ch;
          }
          out[o] = input[best];
          argmax_[o] = best;
        }
      }
    }
  }
  input_shape_ = input.shape();
  return out;
}

template <typename T>
BasicTensor<T> MaxPool2<T>::backward(const BasicTensor<T>& grad_output) {
  if (grad_output.size() != argmax_.size()) {
    throw ShapeError("maxpool2 backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match the last forward");
  }
  BasicTensor<T> grad_input(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) grad_input[argmax_[o]] += grad_output[o];
  return grad_input;
}

// ---- Relu ----

template <typename T>
BasicTensor<T> Relu<T>::forward(const BasicTensor<T>& input, Mode) {
  BasicTensor<T> out = input;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  input_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Relu<T>::backward(const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != input_.shape()) {
    throw ShapeError("relu backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match input " + shape_to_string(input_.shape()));
  }
  BasicTensor<T> grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input_[i] > T{0})) grad[i] = T{0};
  }
  return grad;
}

// ---- Flatten ----

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
  if (input.size() < 2) throw ShapeError("flatten expects a batched input, got " + shape_to_string(input));
  return {input[0], shape_size(input) / input[0]};
}

template <typename T>
BasicTensor<T> Flatten<T>::forward(const BasicTensor<T>& input, Mode) {
  input_shape_ = input.shape();
  return input.reshaped(output_shape(input.shape()));
}

template <typename T>
BasicTensor<T> Flatten<T>::backward(const BasicTensor<T>& grad_output) {
  return grad_output.reshaped(input_shape_);
}

// ---- Softmax ----

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [batch, classes], got " + shape_to_string(logits.shape()));
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.raw() + r * cols;
    T* p = out.raw() + r * cols;
    T peak = in[0];
    for (std::size_t j = 0; j < cols; ++j) {
      if (!std::isfinite(in[j])) throw std::invalid_argument("softmax: non-finite logit");
      peak = std::max(peak, in[j]);
    }
    T total{0};
    for (std::size_t j = 0; j < cols; ++j) {
      p[j] = std::exp(in[j] - peak);
      total += p[j];
    }
    for (std::size_t j = 0; j < cols; ++j) p[j] /= total;
  }
  return out;
}

template <typename T>
Shape Softmax<T>::output_shape(const Shape& input) const {
  if (input.size() != 2) throw ShapeError("softmax expects [batch, classes], got " + shape_to_string(input));
  return input;
}

template <typename T>
BasicTensor<T> Softmax<T>::forward(const BasicTensor<T>& input, Mode) {
  output_ = softmax(input);
  return output_;
}

template <typename T>
BasicTensor<T> Softmax<T>::backward(const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != output_.shape()) {
    throw ShapeError("softmax backward: gradient shape mismatch");
  }
  const std::size_t rows = output_.dim(0), cols = output_.dim(1);
  BasicTensor<T> grad(output_.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = output_.raw() + r * cols;
    const T* g = grad_output.raw() + r * cols;
    T dot{0};
    for (std::size_t j = 0; j < cols; ++j) dot += g[j] * p[j];
    for (std::size_t j = 0; j < cols; ++j) grad[r * cols + j] = p[j] * (g[j] - dot);
  }
  return grad;
}

template <typename T>
std::uint64_t MaxPool2<T>::kink_signature() const {
  Fnv f;
  for (const auto i : argmax_) f.add(i);
  return f.h;
}

template <typename T>
std::uint64_t Relu<T>::kink_signature() const {
  Fnv f;
  std::uint64_t word = 0;
  std::size_t bits = 0;
  for (const T v : input_.data()) {
    word = (word << 1) | (v > T{0});
    if (++bits == 64) {
      f.add(word);
      word = 0;
      bits = 0;
    }
  }
  f.add(word);
  f.add(input_.size());
  return f.h;
}

template class MaxPool2<float>;
template class MaxPool2<double>;
template class Relu<float>;
template class Relu<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Softmax<float>;
template class Softmax<double>;
template Tensor softmax(const Tensor&);
template TensorD softmax(const TensorD&);

}  // namespace bcnn

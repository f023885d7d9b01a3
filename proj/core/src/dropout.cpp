#include <limits>
#include <stdexcept>

#include "bcnn/layers.hpp"

namespace bcnn {

template <typename T>
Dropout<T>::Dropout(double keep_rate, Rng rng) : keep_rate_(keep_rate), rng_(std::move(rng)) {
  if (!(keep_rate > 0.0) || keep_rate > 1.0) {
    throw std::invalid_argument("dropout: keep_rate must be in (0, 1], got " + std::to_string(keep_rate));
  }
}

template <typename T>
BasicTensor<T> Dropout<T>::forward(const BasicTensor<T>& input, Mode mode) {
  identity_ = mode == Mode::Eval || keep_rate_ == 1.0;
  if (identity_) return input;

  if (!frozen_ || mask_.size() != input.size()) {
    // A unit survives when a uniform 64-bit draw falls below keep_rate * 2^64.
    const auto threshold = static_cast<std::uint64_t>(
        keep_rate_ * static_cast<double>(std::numeric_limits<std::uint64_t>::max()));
    const T scale = static_cast<T>(1.0 / keep_rate_);
    mask_.resize(input.size());
    for (auto& m : mask_) m = rng_() < threshold ? scale : T{0};
  }
  BasicTensor<T> out = input;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i];
  return out;
}

template <typename T>
BasicTensor<T> Dropout<T>::backward(const BasicTensor<T>& grad_output) {
  if (identity_) return grad_output;
  if (grad_output.size() != mask_.size()) throw ShapeError("dropout backward: gradient shape mismatch");
  BasicTensor<T> grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask_[i];
  return grad;
}

template class Dropout<float>;
template class Dropout<double>;

}  // namespace bcnn

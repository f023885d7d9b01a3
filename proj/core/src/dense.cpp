#include "bcnn/layers.hpp"
#include "gemm.hpp"

namespace bcnn {

using detail::gemm;
using detail::Trans;

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features, Rng& rng)
    : Dense(he_init<T>({in_features, out_features}, in_features, rng), BasicTensor<T>({out_features})) {}

template <typename T>
Dense<T>::Dense(BasicTensor<T> weight, BasicTensor<T> bias) : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.rank() != 2) throw ShapeError("dense weight must be [in, out], got " + shape_to_string(weight_.shape()));
  if (bias_.shape() != Shape{weight_.dim(1)}) {
    throw ShapeError("dense bias must be [" + std::to_string(weight_.dim(1)) + "], got " +
                     shape_to_string(bias_.shape()));
  }
  weight_grad_ = BasicTensor<T>(weight_.shape());
  bias_grad_ = BasicTensor<T>(bias_.shape());
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.size() != 2) throw ShapeError("dense expects [batch, features], got " + shape_to_string(input));
  if (input[1] != in_features()) {
    throw ShapeError("dense width mismatch: input has " + std::to_string(input[1]) +
                     " features, weight expects " + std::to_string(in_features()));
  }
  return {input[0], out_features()};
}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& input, Mode) {
  BasicTensor<T> out(output_shape(input.shape()));
  const std::size_t n = input.dim(0), k = in_features(), m = out_features();
  for (std::size_t r = 0; r < n; ++r) std::copy(bias_.raw(), bias_.raw() + m, out.raw() + r * m);
  gemm(Trans::No, Trans::No, n, m, k, T{1}, input.raw(), k, weight_.raw(), m, T{1}, out.raw(), m);
  input_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& grad_output) {
  const std::size_t n = input_.dim(0), k = in_features(), m = out_features();
  if (grad_output.shape() != Shape{n, m}) {
    throw ShapeError("dense backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match output [" + std::to_string(n) + "x" + std::to_string(m) + "]");
  }
  gemm(Trans::Yes, Trans::No, k, m, n, T{1}, input_.raw(), k, grad_output.raw(), m, T{0},
       weight_grad_.raw(), m);
  bias_grad_.fill(T{0});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m; ++j) bias_grad_[j] += grad_output[r * m + j];
  }
  BasicTensor<T> grad_input(input_.shape());
  gemm(Trans::No, Trans::Yes, n, k, m, T{1}, grad_output.raw(), m, weight_.raw(), m, T{0},
       grad_input.raw(), k);
  return grad_input;
}

template <typename T>
std::vector<ParamRef<T>> Dense<T>::parameters() {
  return {{"weight", &weight_, &weight_grad_}, {"bias", &bias_, &bias_grad_}};
}

template class Dense<float>;
template class Dense<double>;

}  // namespace bcnn

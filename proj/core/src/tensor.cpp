#include "bcnn/tensor.hpp"

#include <cstring>

namespace bcnn {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 || std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0;
}

template bool bitwise_equal(const Tensor&, const Tensor&);
template bool bitwise_equal(const TensorD&, const TensorD&);

}  // namespace bcnn

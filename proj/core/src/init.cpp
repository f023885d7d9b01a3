#include <cmath>
#include <stdexcept>

#include "bcnn/layers.hpp"

namespace bcnn {

template <typename T>
BasicTensor<T> he_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("he_init: fan_in must be >= 1");
  BasicTensor<T> out(shape);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : out.data()) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
void Layer<T>::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(T{0});
}

template Tensor he_init<float>(const Shape&, std::size_t, Rng&);
template TensorD he_init<double>(const Shape&, std::size_t, Rng&);
template class Layer<float>;
template class Layer<double>;

}  // namespace bcnn

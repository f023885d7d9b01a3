#include "bcnn/optimizer.hpp"

#include <stdexcept>

namespace bcnn {

template <typename T>
void sgd_momentum_step(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicTensor<T>& velocity, double lr,
                       double momentum) {
  if (param.shape() != grad.shape() || param.shape() != velocity.shape()) {
    throw ShapeError("sgd step: parameter " + shape_to_string(param.shape()) + ", gradient " +
                     shape_to_string(grad.shape()) + " and velocity " + shape_to_string(velocity.shape()) +
                     " must agree");
  }
  const T mu = static_cast<T>(momentum);
  const T eta = static_cast<T>(lr);
  T* p = param.raw();
  T* v = velocity.raw();
  const T* g = grad.raw();
  for (std::size_t i = 0; i < param.size(); ++i) {
    v[i] = mu * v[i] - eta * g[i];
    p[i] += v[i];
  }
}

template <typename T>
void SgdMomentum<T>::step(std::span<const ParamRef<T>> params, double lr) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value->shape());
  }
  if (velocity_.size() != params.size()) throw std::invalid_argument("optimizer parameter list changed size");
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_momentum_step(*params[i].value, *params[i].grad, velocity_[i], lr, momentum_);
  }
}

template void sgd_momentum_step(Tensor&, const Tensor&, Tensor&, double, double);
template void sgd_momentum_step(TensorD&, const TensorD&, TensorD&, double, double);
template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace bcnn

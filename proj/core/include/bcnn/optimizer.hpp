#pragma once

#include <span>
#include <vector>

#include "bcnn/layers.hpp"

namespace bcnn {

inline constexpr double kDefaultMomentum = 0.9;

/// Classical momentum: v <- momentum * v - lr * grad; param <- param + v.
template <typename T>
void sgd_momentum_step(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicTensor<T>& velocity, double lr,
                       double momentum = kDefaultMomentum);

/// Velocity buffers for a fixed parameter list, zero-initialized on the
/// first step.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = kDefaultMomentum) : momentum_(momentum) {}

  void step(std::span<const ParamRef<T>> params, double lr);

  double momentum() const noexcept { return momentum_; }
  const std::vector<BasicTensor<T>>& velocity() const noexcept { return velocity_; }

 private:
  double momentum_;
  std::vector<BasicTensor<T>> velocity_;
};

}  // namespace bcnn

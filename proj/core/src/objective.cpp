#include "bcnn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bcnn {

LossWeights::LossWeights(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("loss weights must not be empty");
  double sum = 0.0;
  for (double a : values_) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw std::invalid_argument("loss weight " + std::to_string(a) + " outside [0, 1]");
    }
    sum += a;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("loss weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

LossWeights LossWeights::fine_only(std::size_t levels) {
  std::vector<double> v(levels, 0.0);
  v.back() = 1.0;
  return LossWeights(std::move(v));
}

namespace {

template <typename T>
void check_targets(const BasicTensor<T>& probabilities, std::span<const std::size_t> targets) {
  if (probabilities.rank() != 2) {
    throw ShapeError("expected [batch, classes] scores, got " + shape_to_string(probabilities.shape()));
  }
  if (targets.size() != probabilities.dim(0)) {
    throw std::invalid_argument("got " + std::to_string(targets.size()) + " targets for a batch of " +
                                std::to_string(probabilities.dim(0)));
  }
  const std::size_t classes = probabilities.dim(1);
  for (std::size_t t : targets) {
    if (t >= classes) {
      throw std::invalid_argument("target " + std::to_string(t) + " out of range [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

template <typename T>
double cross_entropy(const BasicTensor<T>& probabilities, std::span<const std::size_t> targets) {
  check_targets(probabilities, targets);
  const std::size_t classes = probabilities.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = static_cast<double>(probabilities[i * classes + targets[i]]);
    total -= std::log(std::max(p, kProbabilityFloor));
  }
  return total / static_cast<double>(targets.size());
}

template <typename T>
BasicTensor<T> cross_entropy_logit_grad(const BasicTensor<T>& probabilities, std::span<const std::size_t> targets,
                                        double weight) {
  check_targets(probabilities, targets);
  const std::size_t classes = probabilities.dim(1);
  const T scale = static_cast<T>(weight / static_cast<double>(targets.size()));
  BasicTensor<T> grad = probabilities;
  for (std::size_t i = 0; i < targets.size(); ++i) grad[i * classes + targets[i]] -= T{1};
  for (auto& g : grad.data()) g *= scale;
  return grad;
}

double bcnn_loss(std::span<const double> level_losses, const LossWeights& weights) {
  if (level_losses.size() != weights.size()) {
    throw std::invalid_argument("got " + std::to_string(level_losses.size()) + " level losses for " +
                                std::to_string(weights.size()) + " loss weights");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < level_losses.size(); ++k) total += weights[k] * level_losses[k];
  return total;
}

template <typename T>
Labels argmax_rows(const BasicTensor<T>& scores) {
  if (scores.rank() != 2) throw ShapeError("argmax expects [batch, classes], got " + shape_to_string(scores.shape()));
  const std::size_t rows = scores.dim(0), cols = scores.dim(1);
  Labels out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = scores.raw() + r * cols;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

std::vector<double> accuracy_per_level(std::span<const Labels> predictions, std::span<const Labels> targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("prediction/target level count mismatch");
  std::vector<double> out;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    if (predictions[k].size() != targets[k].size()) throw std::invalid_argument("prediction/target length mismatch");
    if (targets[k].empty()) {
      out.push_back(0.0);
      continue;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < targets[k].size(); ++i) correct += predictions[k][i] == targets[k][i];
    out.push_back(static_cast<double>(correct) / static_cast<double>(targets[k].size()));
  }
  return out;
}

template <typename T>
std::vector<double> accuracy_per_level(std::span<const BasicTensor<T>> scores, std::span<const Labels> targets) {
  std::vector<Labels> predictions;
  for (const auto& s : scores) predictions.push_back(argmax_rows(s));
  return accuracy_per_level(std::span<const Labels>(predictions), targets);
}

double consistency_rate(const LabelTree& tree, std::span<const Labels> predictions) {
  if (predictions.size() != tree.levels()) {
    throw std::invalid_argument("need one prediction array per tree level");
  }
  const std::size_t n = predictions.front().size();
  for (const auto& p : predictions) {
    if (p.size() != n) throw std::invalid_argument("prediction arrays differ in length");
  }
  if (n == 0) return 1.0;
  std::size_t consistent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (std::size_t k = 1; k < predictions.size() && ok; ++k) {
      ok = tree.parent(k + 1, predictions[k][i]) == predictions[k - 1][i];
    }
    consistent += ok;
  }
  return static_cast<double>(consistent) / static_cast<double>(n);
}

template double cross_entropy(const Tensor&, std::span<const std::size_t>);
template double cross_entropy(const TensorD&, std::span<const std::size_t>);
template Tensor cross_entropy_logit_grad(const Tensor&, std::span<const std::size_t>, double);
template TensorD cross_entropy_logit_grad(const TensorD&, std::span<const std::size_t>, double);
template Labels argmax_rows(const Tensor&);
template Labels argmax_rows(const TensorD&);
template std::vector<double> accuracy_per_level(std::span<const Tensor>, std::span<const Labels>);
template std::vector<double> accuracy_per_level(std::span<const TensorD>, std::span<const Labels>);

}  // namespace bcnn

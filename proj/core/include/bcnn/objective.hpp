#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bcnn/label_tree.hpp"
#include "bcnn/tensor.hpp"

namespace bcnn {

/// Per-level loss weights: each in [0, 1], summing to 1 within 1e-6.
/// Invalid vectors are rejected, never renormalized.
class LossWeights {
 public:
  static constexpr double kSumTolerance = 1e-6;

  explicit LossWeights(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }

  /// All weight on the last (fine) level.
  static LossWeights fine_only(std::size_t levels);

 private:
  std::vector<double> values_;
};

/// Probabilities below this are clamped before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -log(p[target]).
template <typename T>
double cross_entropy(const BasicTensor<T>& probabilities, std::span<const std::size_t> targets);

/// Gradient of weight * cross_entropy(softmax(logits)) w.r.t. the logits,
/// given the softmax output: weight * (p - onehot(target)) / batch.
template <typename T>
BasicTensor<T> cross_entropy_logit_grad(const BasicTensor<T>& probabilities, std::span<const std::size_t> targets,
                                        double weight);

/// sum_k A_k * loss_k.
double bcnn_loss(std::span<const double> level_losses, const LossWeights& weights);

/// Row-wise argmax; ties resolve to the lowest index.
template <typename T>
Labels argmax_rows(const BasicTensor<T>& scores);

std::vector<double> accuracy_per_level(std::span<const Labels> predictions, std::span<const Labels> targets);

template <typename T>
std::vector<double> accuracy_per_level(std::span<const BasicTensor<T>> scores, std::span<const Labels> targets);

/// Fraction of samples whose per-level predictions form a root-to-leaf
/// path: for every k < K the parent of the level-(k+1) prediction is the
/// level-k prediction.
double consistency_rate(const LabelTree& tree, std::span<const Labels> predictions);

struct MetricsRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  std::vector<double> loss_weights;
  double train_loss = 0.0;
  std::vector<double> train_accuracy;
  std::vector<double> test_accuracy;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

}  // namespace bcnn

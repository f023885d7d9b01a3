#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "bcnn/dataset.hpp"
#include "bcnn/label_tree.hpp"
#include "bcnn/model.hpp"
#include "bcnn/objective.hpp"
#include "bcnn/optimizer.hpp"
#include "bcnn/schedule.hpp"

namespace bcnn {

inline constexpr std::size_t kDefaultBatchSize = 128;
inline constexpr std::size_t kEvalBatchSize = 128;

/// One shuffled pass over `data`. Per batch: forward every head, per-level
/// cross-entropy against the tree-derived targets, weighted backward and an
/// SGD step over all parameters. Levels with zero weight are detached, so
/// their exclusive parameters see a zero gradient. A trailing batch of a
/// single sample is skipped (batchnorm needs two rows).
///
/// The record carries lr, weights, mean training loss and per-level
/// training accuracy; epoch and test accuracy are left for the caller.
template <typename T>
MetricsRecord train_epoch(BCnnModel<T>& model, const Dataset& data, const LabelTree& tree, const LossWeights& weights,
                          double lr, std::size_t batch_size, Rng& rng, SgdMomentum<T>& optimizer);

/// Eval-mode per-level argmax predictions.
template <typename T>
std::vector<Labels> predict(BCnnModel<T>& model, const Tensor& images, std::size_t batch_size = kEvalBatchSize);

struct Evaluation {
  std::vector<double> accuracy;  // per level, coarse to fine
  double consistency = 0.0;
};

template <typename T>
Evaluation evaluate(BCnnModel<T>& model, const Dataset& data, const LabelTree& tree,
                    std::size_t batch_size = kEvalBatchSize);

struct FitOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = kDefaultBatchSize;
  ScheduleTable lr_schedule;
  ScheduleTable weight_schedule;
  std::uint64_t seed = 0;
  /// When set, history.csv, final.ckpt and best.ckpt are (re)written after
  /// every epoch.
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
};

struct FitResult {
  std::vector<MetricsRecord> history;
  std::size_t best_epoch = 0;  // highest fine-level test accuracy, earliest on ties
};

template <typename T>
FitResult fit(BCnnModel<T>& model, const LabelTree& tree, const Dataset& train, const Dataset& test,
              const FitOptions& options);

}  // namespace bcnn

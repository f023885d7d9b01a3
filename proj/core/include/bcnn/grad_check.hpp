#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcnn/layers.hpp"
#include "bcnn/model.hpp"
#include "bcnn/objective.hpp"

namespace bcnn {

/// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
/// so entries whose true gradient is ~0 are judged on absolute error.
inline constexpr double kRelativeErrorFloor = 1e-5;

double relative_error(double analytic, double numeric);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_entry;  // "<tensor>[<flat index>]"
  std::size_t entries = 0;  // entries compared
  /// Entries left out because the +h or -h evaluation landed on a different
  /// linear piece of a ReLU or max-pool (see Layer::kink_signature).
  std::size_t skipped_kinks = 0;
};

/// Central differences over every input and parameter entry of `layer`,
/// against the analytic gradient of a fixed random linear functional of the
/// output. (A plain sum would be degenerate for softmax and batchnorm,
/// whose outputs sum to a constant.) Stochastic layers are frozen after the
/// first forward.
GradCheckReport grad_check(Layer<double>& layer, const TensorD& input, double h = 1e-5, Mode mode = Mode::Train,
                           std::uint64_t seed = 0);

/// Central differences over every model parameter of the B-CNN loss
/// sum_k A_k CE_k in Train mode. Perturbations only rerun the part of the
/// network downstream of the perturbed layer.
GradCheckReport grad_check_model(BCnnModel<double>& model, const TensorD& batch, std::span<const Labels> targets,
                                 const LossWeights& weights, double h = 1e-5);

/// One small case per layer type, as used by the `gradcheck` command.
struct LayerCase {
  LayerPtr<double> layer;
  TensorD input;
  Mode mode = Mode::Train;
};

std::vector<LayerCase> layer_type_cases(std::uint64_t seed);

}  // namespace bcnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcnn/label_tree.hpp"
#include "bcnn/layers.hpp"

namespace bcnn {

enum class Preset { A, B, C };

std::string_view preset_name(Preset preset);
/// "A", "B" or "C" (case-insensitive); throws std::invalid_argument otherwise.
Preset parse_preset(std::string_view text);
/// Number of label-tree levels a B-CNN preset predicts (A: 2, B and C: 3).
std::size_t preset_levels(Preset preset);
/// Per-sample input shape, HWC.
Shape preset_input_shape(Preset preset);

/// A preset plus a divisor that shrinks conv channels and hidden FC widths
/// (never the class-count heads) for desk-scale runs.
struct ArchitecturePreset {
  Preset preset = Preset::A;
  std::size_t width_divisor = 1;
};

template <typename T>
struct NamedLayer {
  std::string name;
  LayerPtr<T> layer;
};

/// Output head predicting one tree level. It reads the trunk activation
/// after the first `attach` trunk layers.
template <typename T>
struct Head {
  std::string name;
  std::size_t level = 0;
  std::size_t attach = 0;
  std::vector<NamedLayer<T>> layers;
};

/// Trunk ConvNet with K softmax heads ordered coarse to fine. Head k taps
/// the trunk at a strictly later point than head k-1; the fine head reads
/// the end of the trunk.
template <typename T>
class BCnnModel {
 public:
  BCnnModel() = default;
  explicit BCnnModel(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {}

  void add_trunk_layer(std::string name, LayerPtr<T> layer);
  void add_head(Head<T> head);

  std::size_t levels() const noexcept { return heads_.size(); }
  const Shape& sample_shape() const noexcept { return sample_shape_; }
  /// Trunk positions of the coarse heads (all heads but the last).
  std::vector<std::size_t> branch_points() const;

  /// Per-level class probabilities, each [batch, c_k].
  std::vector<BasicTensor<T>> forward(const BasicTensor<T>& batch, Mode mode);

  /// Backpropagates per-head gradients with respect to the pre-softmax
  /// logits. An empty tensor detaches that head: its parameters receive
  /// zero gradient and nothing flows from it into the trunk.
  void backward(std::span<const BasicTensor<T>> logit_grads);

  std::vector<ParamRef<T>> parameters();
  std::vector<BufferRef<T>> buffers();
  /// Parameters owned by the head of `level` alone.
  std::vector<ParamRef<T>> head_parameters(std::size_t level);
  std::size_t param_count();

  void zero_grad();
  void freeze_randomness(bool frozen);

  std::span<NamedLayer<T>> trunk() noexcept { return trunk_; }
  std::span<Head<T>> heads() noexcept { return heads_; }

 private:
  Shape sample_shape_;
  std::vector<NamedLayer<T>> trunk_;
  std::vector<Head<T>> heads_;
};

/// B-CNN for a preset: trunk and fine head of the baseline network plus a
/// Flatten/FC branch at every marked pool. Head widths come from `tree`.
/// Layer parameters and dropout streams are drawn from per-layer streams
/// of `seed`, so the shared layers of build_preset and build_baseline
/// start bitwise identical.
template <typename T>
BCnnModel<T> build_preset(ArchitecturePreset arch, const LabelTree& tree, std::uint64_t seed,
                          double keep_rate = 0.5);

/// Branchless baseline: same trunk and fine head, a single output.
template <typename T>
BCnnModel<T> build_baseline(ArchitecturePreset arch, std::size_t fine_count, std::uint64_t seed,
                            double keep_rate = 0.5);

}  // namespace bcnn

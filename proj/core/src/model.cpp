#include "bcnn/model.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace bcnn {

std::string_view preset_name(Preset preset) {
  switch (preset) {
    case Preset::A: return "A";
    case Preset::B: return "B";
    case Preset::C: return "C";
  }
  return "?";
}

Preset parse_preset(std::string_view text) {
  if (text.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(text[0]))) {
      case 'A': return Preset::A;
      case 'B': return Preset::B;
      case 'C': return Preset::C;
      default: break;
    }
  }
  throw std::invalid_argument("unknown architecture '" + std::string(text) + "' (expected A, B or C)");
}

std::size_t preset_levels(Preset preset) { return preset == Preset::A ? 2 : 3; }

Shape preset_input_shape(Preset preset) {
  return preset == Preset::A ? Shape{28, 28, 1} : Shape{32, 32, 3};
}

template <typename T>
void BCnnModel<T>::add_trunk_layer(std::string name, LayerPtr<T> layer) {
  trunk_.push_back({std::move(name), std::move(layer)});
}

template <typename T>
void BCnnModel<T>::add_head(Head<T> head) {
  if (head.attach > trunk_.size()) throw std::invalid_argument("head attaches beyond the trunk");
  if (!heads_.empty() && head.attach <= heads_.back().attach) {
    throw std::invalid_argument("heads must tap the trunk at strictly increasing depth");
  }
  if (head.layers.empty()) throw std::invalid_argument("head '" + head.name + "' has no layers");
  head.level = heads_.size() + 1;
  heads_.push_back(std::move(head));
}

template <typename T>
std::vector<std::size_t> BCnnModel<T>::branch_points() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k + 1 < heads_.size(); ++k) out.push_back(heads_[k].attach);
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> BCnnModel<T>::forward(const BasicTensor<T>& batch, Mode mode) {
  if (batch.rank() != sample_shape_.size() + 1 ||
      !std::equal(sample_shape_.begin(), sample_shape_.end(), batch.shape().begin() + 1)) {
    throw ShapeError("model input " + shape_to_string(batch.shape()) + " does not match sample shape " +
                     shape_to_string(sample_shape_));
  }
  std::vector<BasicTensor<T>> outputs(heads_.size());
  auto run_heads_at = [&](std::size_t position, const BasicTensor<T>& activation) {
    for (std::size_t k = 0; k < heads_.size(); ++k) {
      if (heads_[k].attach != position) continue;
      BasicTensor<T> x = activation;
      for (auto& nl : heads_[k].layers) x = nl.layer->forward(x, mode);
      outputs[k] = softmax(x);
    }
  };
  BasicTensor<T> x = batch;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    run_heads_at(i, x);
    x = trunk_[i].layer->forward(x, mode);
  }
  run_heads_at(trunk_.size(), x);
  return outputs;
}

template <typename T>
void BCnnModel<T>::backward(std::span<const BasicTensor<T>> logit_grads) {
  if (logit_grads.size() != heads_.size()) {
    throw std::invalid_argument("backward needs one gradient per head: got " + std::to_string(logit_grads.size()) +
                                ", model has " + std::to_string(heads_.size()));
  }
  zero_grad();
  BasicTensor<T> grad;  // gradient w.r.t. the trunk activation at the current position
  for (std::size_t pos = trunk_.size() + 1; pos-- > 0;) {
    for (std::size_t k = heads_.size(); k-- > 0;) {
      if (heads_[k].attach != pos || logit_grads[k].empty()) continue;
      BasicTensor<T> g = logit_grads[k];
      for (auto it = heads_[k].layers.rbegin(); it != heads_[k].layers.rend(); ++it) g = it->layer->backward(g);
      if (grad.empty()) {
        grad = std::move(g);
      } else {
        if (grad.shape() != g.shape()) throw ShapeError("branch gradient shape mismatch");
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
      }
    }
    if (pos > 0 && !grad.empty()) grad = trunk_[pos - 1].layer->backward(grad);
  }
}

template <typename T>
std::vector<ParamRef<T>> BCnnModel<T>::parameters() {
  std::vector<ParamRef<T>> out;
  auto collect = [&](NamedLayer<T>& nl) {
    for (auto& p : nl.layer->parameters()) out.push_back({nl.name + "." + p.name, p.value, p.grad});
  };
  for (auto& nl : trunk_) collect(nl);
  for (auto& head : heads_) {
    for (auto& nl : head.layers) collect(nl);
  }
  return out;
}

template <typename T>
std::vector<BufferRef<T>> BCnnModel<T>::buffers() {
  std::vector<BufferRef<T>> out;
  auto collect = [&](NamedLayer<T>& nl) {
    for (auto& b : nl.layer->buffers()) out.push_back({nl.name + "." + b.name, b.value});
  };
  for (auto& nl : trunk_) collect(nl);
  for (auto& head : heads_) {
    for (auto& nl : head.layers) collect(nl);
  }
  return out;
}

template <typename T>
std::vector<ParamRef<T>> BCnnModel<T>::head_parameters(std::size_t level) {
  if (level < 1 || level > heads_.size()) throw std::invalid_argument("no head for level " + std::to_string(level));
  std::vector<ParamRef<T>> out;
  for (auto& nl : heads_[level - 1].layers) {
    for (auto& p : nl.layer->parameters()) out.push_back({nl.name + "." + p.name, p.value, p.grad});
  }
  return out;
}

template <typename T>
std::size_t BCnnModel<T>::param_count() {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.value->size();
  return total;
}

template <typename T>
void BCnnModel<T>::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(T{0});
}

template <typename T>
void BCnnModel<T>::freeze_randomness(bool frozen) {
  for (auto& nl : trunk_) nl.layer->freeze_randomness(frozen);
  for (auto& head : heads_) {
    for (auto& nl : head.layers) nl.layer->freeze_randomness(frozen);
  }
}

// ---- presets ----

namespace {

// Trunk recipe: conv widths, pools, and the taps where coarse branches attach.
enum class Op { Conv, Pool, Tap };

struct Step {
  Op op;
  std::size_t width = 0;
};

struct Recipe {
  std::vector<Step> trunk;
  std::vector<std::vector<std::size_t>> branch_hidden;  // per coarse level
  std::vector<std::size_t> fine_hidden;
};

Recipe recipe_for(Preset preset) {
  auto convs = [](std::size_t width, int times) { return std::vector<Step>(times, Step{Op::Conv, width}); };
  auto join = [](std::initializer_list<std::vector<Step>> parts) {
    std::vector<Step> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  };
  const std::vector<Step> pool{{Op::Pool}}, tap{{Op::Tap}};
  switch (preset) {
    case Preset::A:
      return {join({convs(32, 1), pool, tap, convs(64, 2), pool}), {{64}}, {128}};
    case Preset::B:
      return {join({convs(64, 2), pool, convs(128, 2), pool, tap, convs(256, 2), pool, tap, convs(512, 2), pool}),
              {{256, 256}, {512, 512}},
              {1024, 1024}};
    case Preset::C:
      // VGG16 without its final pool.
      return {join({convs(64, 2), pool, convs(128, 2), pool, convs(256, 3), pool, tap, convs(512, 3), pool, tap,
                    convs(512, 3)}),
              {{512, 512}, {1024, 1024}},
              {4096, 4096}};
  }
  throw std::invalid_argument("unknown preset");
}

std::size_t divided(std::size_t width, std::size_t divisor) {
  const std::size_t w = width / divisor;
  if (w == 0) {
    throw std::invalid_argument("width divisor " + std::to_string(divisor) + " reduces width " +
                                std::to_string(width) + " to zero");
  }
  return w;
}

// Flatten, then Dense/BatchNorm/Relu/Dropout per hidden width, then the class logits.
template <typename T>
Head<T> make_head(std::string name, std::size_t attach, const Shape& tap_shape, const std::vector<std::size_t>& hidden,
                  std::size_t classes, std::size_t divisor, std::uint64_t seed, double keep_rate) {
  Head<T> head;
  head.name = name;
  head.attach = attach;
  std::size_t idx = 0;
  auto add = [&](LayerPtr<T> layer) {
    std::string layer_name = name + "." + std::to_string(idx++) + "." + std::string(layer->kind());
    head.layers.push_back({std::move(layer_name), std::move(layer)});
  };
  auto next_name = [&](std::string_view kind) { return name + "." + std::to_string(idx) + "." + std::string(kind); };

  add(std::make_unique<Flatten<T>>());
  std::size_t width = shape_size(tap_shape);
  for (std::size_t h : hidden) {
    const std::size_t out = divided(h, divisor);
    Rng init = make_rng(seed, next_name("dense"));
    add(std::make_unique<Dense<T>>(width, out, init));
    add(std::make_unique<BatchNorm<T>>(out));
    add(std::make_unique<Relu<T>>());
    add(std::make_unique<Dropout<T>>(keep_rate, make_rng(seed, next_name("dropout"))));
    width = out;
  }
  Rng init = make_rng(seed, next_name("dense"));
  add(std::make_unique<Dense<T>>(width, classes, init));
  return head;
}

template <typename T>
BCnnModel<T> build(ArchitecturePreset arch, const std::vector<std::size_t>& head_widths, bool with_branches,
                   std::uint64_t seed, double keep_rate) {
  if (arch.width_divisor == 0) throw std::invalid_argument("width divisor must be >= 1");
  const Recipe recipe = recipe_for(arch.preset);
  const Shape sample = preset_input_shape(arch.preset);
  BCnnModel<T> model(sample);

  std::vector<std::pair<std::size_t, Shape>> taps;  // trunk position and activation shape
  Shape shape = sample;                             // per-sample HWC
  std::size_t idx = 0;
  auto name_of = [&](std::string_view kind) { return "trunk." + std::to_string(idx) + "." + std::string(kind); };
  for (const Step& step : recipe.trunk) {
    switch (step.op) {
      case Op::Conv: {
        const std::size_t filters = divided(step.width, arch.width_divisor);
        Rng init = make_rng(seed, name_of("conv2d"));
        auto conv = std::make_unique<Conv2d<T>>(shape[2], filters, init);
        model.add_trunk_layer(name_of("conv2d"), std::move(conv));
        ++idx;
        model.add_trunk_layer(name_of("batchnorm"), std::make_unique<BatchNorm<T>>(filters));
        ++idx;
        model.add_trunk_layer(name_of("relu"), std::make_unique<Relu<T>>());
        ++idx;
        shape[2] = filters;
        break;
      }
      case Op::Pool:
        model.add_trunk_layer(name_of("maxpool2"), std::make_unique<MaxPool2<T>>());
        ++idx;
        shape[0] /= 2;
        shape[1] /= 2;
        break;
      case Op::Tap:
        taps.emplace_back(idx, shape);
        break;
    }
  }

  if (with_branches) {
    for (std::size_t k = 0; k < taps.size(); ++k) {
      model.add_head(make_head<T>("coarse" + std::to_string(k + 1), taps[k].first, taps[k].second,
                                  recipe.branch_hidden[k], head_widths[k], arch.width_divisor, seed, keep_rate));
    }
  }
  model.add_head(make_head<T>("fine", idx, shape, recipe.fine_hidden, head_widths.back(), arch.width_divisor, seed,
                              keep_rate));
  return model;
}

}  // namespace

template <typename T>
BCnnModel<T> build_preset(ArchitecturePreset arch, const LabelTree& tree, std::uint64_t seed, double keep_rate) {
  const std::size_t expected = preset_levels(arch.preset);
  if (tree.levels() != expected) {
    throw std::invalid_argument("preset " + std::string(preset_name(arch.preset)) + " needs a " +
                                std::to_string(expected) + "-level label tree, got " +
                                std::to_string(tree.levels()) + " levels");
  }
  return build<T>(arch, std::vector<std::size_t>(tree.counts().begin(), tree.counts().end()), true, seed,
                  keep_rate);
}

template <typename T>
BCnnModel<T> build_baseline(ArchitecturePreset arch, std::size_t fine_count, std::uint64_t seed, double keep_rate) {
  if (fine_count == 0) throw std::invalid_argument("baseline needs at least one class");
  return build<T>(arch, {fine_count}, false, seed, keep_rate);
}

template class BCnnModel<float>;
template class BCnnModel<double>;
template BCnnModel<float> build_preset(ArchitecturePreset, const LabelTree&, std::uint64_t, double);
template BCnnModel<double> build_preset(ArchitecturePreset, const LabelTree&, std::uint64_t, double);
template BCnnModel<float> build_baseline(ArchitecturePreset, std::size_t, std::uint64_t, double);
template BCnnModel<double> build_baseline(ArchitecturePreset, std::size_t, std::uint64_t, double);

}  // namespace bcnn

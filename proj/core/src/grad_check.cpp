#include "bcnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "bcnn/error.hpp"

namespace bcnn {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

TensorD random_normal(const Shape& shape, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  TensorD t(shape);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void record(GradCheckReport& report, const std::string& tensor, std::size_t index, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  ++report.entries;
  if (report.worst_entry.empty() || err > report.max_rel_error) {
    report.max_rel_error = err;
    report.worst_entry = tensor + "[" + std::to_string(index) + "]";
  }
}

struct Evaluation {
  double loss;
  std::uint64_t signature;
};

struct Difference {
  double derivative;
  bool straddles_kink;
};

// Central difference of f() with respect to *slot.
template <typename F>
Difference central_difference(double* slot, double h, std::uint64_t base_signature, F&& f) {
  const double saved = *slot;
  *slot = saved + h;
  const Evaluation plus = f();
  *slot = saved - h;
  const Evaluation minus = f();
  *slot = saved;
  return {(plus.loss - minus.loss) / (2.0 * h),
          plus.signature != base_signature || minus.signature != base_signature};
}

void compare(GradCheckReport& report, const std::string& tensor, std::size_t index, double analytic,
             const Difference& numeric) {
  if (numeric.straddles_kink) {
    ++report.skipped_kinks;
  } else {
    record(report, tensor, index, analytic, numeric.derivative);
  }
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t value) {
  return seed ^ (value + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
}

}  // namespace

GradCheckReport grad_check(Layer<double>& layer, const TensorD& input, double h, Mode mode, std::uint64_t seed) {
  layer.freeze_randomness(false);
  const TensorD out = layer.forward(input, mode);
  layer.freeze_randomness(true);

  Rng rng = make_rng(seed, "gradcheck.functional");
  const TensorD weights = random_normal(out.shape(), rng);
  const TensorD input_grad = layer.backward(weights);

  GradCheckReport report;
  TensorD x = input;
  auto loss = [&] {
    const double value = dot(weights, layer.forward(x, mode));
    return Evaluation{value, layer.kink_signature()};
  };
  const std::uint64_t base = loss().signature;
  for (std::size_t i = 0; i < x.size(); ++i) {
    compare(report, "input", i, input_grad[i], central_difference(&x.raw()[i], h, base, loss));
  }
  for (auto& p : layer.parameters()) {
    const TensorD analytic = *p.grad;
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      compare(report, std::string(layer.kind()) + "." + p.name, i, analytic[i],
              central_difference(&p.value->raw()[i], h, base, loss));
    }
  }
  layer.freeze_randomness(false);
  return report;
}

GradCheckReport grad_check_model(BCnnModel<double>& model, const TensorD& batch, std::span<const Labels> targets,
                                 const LossWeights& weights, double h) {
  const std::size_t levels = model.levels();
  if (targets.size() != levels || weights.size() != levels) {
    throw std::invalid_argument("grad_check_model: need one target list and one weight per level");
  }

  model.freeze_randomness(false);
  const auto probs = model.forward(batch, Mode::Train);
  model.freeze_randomness(true);
  std::vector<TensorD> logit_grads(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    if (weights[k] != 0.0) logit_grads[k] = cross_entropy_logit_grad(probs[k], targets[k], weights[k]);
  }
  model.backward(logit_grads);

  auto trunk = model.trunk();
  auto heads = model.heads();

  // Activation caches: trunk_in[i] feeds trunk layer i; head_in[k][j] feeds layer j of head k.
  std::vector<TensorD> trunk_in(trunk.size() + 1);
  trunk_in[0] = batch;
  for (std::size_t i = 0; i < trunk.size(); ++i) trunk_in[i + 1] = trunk[i].layer->forward(trunk_in[i], Mode::Train);

  // Reruns head k from its layer `from`; returns the level loss and folds
  // the kink signatures of the rerun layers into *signature.
  auto run_head = [&](std::size_t k, std::size_t from, TensorD x, std::vector<TensorD>* cache,
                      std::uint64_t* signature) {
    for (std::size_t j = from; j < heads[k].layers.size(); ++j) {
      if (cache) (*cache)[j] = x;
      x = heads[k].layers[j].layer->forward(x, Mode::Train);
      if (signature) *signature = mix(*signature, heads[k].layers[j].layer->kink_signature());
    }
    return cross_entropy(softmax(x), targets[k]);
  };

  std::vector<std::vector<TensorD>> head_in(levels);
  std::vector<double> cached_losses(levels, 0.0);
  for (std::size_t k = 0; k < levels; ++k) {
    head_in[k].resize(heads[k].layers.size());
    cached_losses[k] = run_head(k, 0, trunk_in[heads[k].attach], &head_in[k], nullptr);
  }

  GradCheckReport report;
  auto check_params = [&](NamedLayer<double>& nl, auto&& loss) {
    const std::uint64_t base = loss().signature;
    for (auto& p : nl.layer->parameters()) {
      for (std::size_t i = 0; i < p.value->size(); ++i) {
        compare(report, nl.name + "." + p.name, i, (*p.grad)[i],
                central_difference(&p.value->raw()[i], h, base, loss));
      }
    }
  };

  for (std::size_t t = 0; t < trunk.size(); ++t) {
    auto loss = [&] {
      std::vector<double> losses = cached_losses;
      std::uint64_t signature = 0;
      TensorD x = trunk_in[t];
      for (std::size_t i = t; i < trunk.size(); ++i) {
        x = trunk[i].layer->forward(x, Mode::Train);
        signature = mix(signature, trunk[i].layer->kink_signature());
        for (std::size_t k = 0; k < levels; ++k) {
          if (heads[k].attach == i + 1 && weights[k] != 0.0) losses[k] = run_head(k, 0, x, nullptr, &signature);
        }
      }
      return Evaluation{bcnn_loss(losses, weights), signature};
    };
    check_params(trunk[t], loss);
  }
  for (std::size_t k = 0; k < levels; ++k) {
    for (std::size_t j = 0; j < heads[k].layers.size(); ++j) {
      auto loss = [&] {
        if (weights[k] == 0.0) return Evaluation{bcnn_loss(cached_losses, weights), 0};
        std::vector<double> losses = cached_losses;
        std::uint64_t signature = 0;
        losses[k] = run_head(k, j, head_in[k][j], nullptr, &signature);
        return Evaluation{bcnn_loss(losses, weights), signature};
      };
      check_params(heads[k].layers[j], loss);
    }
  }
  model.freeze_randomness(false);
  return report;
}

std::vector<LayerCase> layer_type_cases(std::uint64_t seed) {
  Rng rng = make_rng(seed, "gradcheck.cases");
  std::vector<LayerCase> cases;

  cases.push_back({std::make_unique<Conv2d<double>>(2, 3, rng), random_normal({2, 5, 5, 2}, rng)});

  // Distinct values spaced well beyond h, so no window has a near-tie.
  TensorD pool_in({2, 4, 4, 3});
  std::vector<double> ranks(pool_in.size());
  std::iota(ranks.begin(), ranks.end(), 0.0);
  std::shuffle(ranks.begin(), ranks.end(), rng);
  for (std::size_t i = 0; i < ranks.size(); ++i) pool_in[i] = 0.1 * ranks[i] - 4.0;
  cases.push_back({std::make_unique<MaxPool2<double>>(), std::move(pool_in)});

  TensorD relu_in = random_normal({3, 7}, rng);
  for (auto& v : relu_in.data()) v = std::copysign(0.1 + std::abs(v), v);
  cases.push_back({std::make_unique<Relu<double>>(), std::move(relu_in)});

  cases.push_back({std::make_unique<Dense<double>>(3, 4, rng), random_normal({2, 3}, rng)});

  auto bn = std::make_unique<BatchNorm<double>>(4);
  bn->gamma() = random_normal({4}, rng);
  bn->beta() = random_normal({4}, rng);
  cases.push_back({std::move(bn), random_normal({2, 3, 3, 4}, rng)});

  cases.push_back({std::make_unique<Dropout<double>>(0.5, make_rng(seed, "gradcheck.dropout")),
                   random_normal({4, 6}, rng)});
  cases.push_back({std::make_unique<Flatten<double>>(), random_normal({2, 3, 3, 2}, rng)});
  cases.push_back({std::make_unique<Softmax<double>>(), random_normal({3, 5}, rng)});
  return cases;
}

}  // namespace bcnn

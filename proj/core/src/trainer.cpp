#include "bcnn/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "bcnn/checkpoint.hpp"
#include "bcnn/metrics_csv.hpp"

namespace bcnn {

namespace {

template <typename T>
BasicTensor<T> gather_rows(const Tensor& images, std::span<const std::size_t> rows) {
  Shape shape = images.shape();
  shape[0] = rows.size();
  BasicTensor<T> out(shape);
  const std::size_t width = images.row_size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const float* src = images.raw() + rows[r] * width;
    std::copy(src, src + width, out.raw() + r * width);
  }
  return out;
}

template <typename T>
BasicTensor<T> rows_as(const Tensor& images, std::size_t first, std::size_t count) {
  if constexpr (std::is_same_v<T, float>) {
    return images.slice_rows(first, count);
  } else {
    return images.slice_rows(first, count).template cast<T>();
  }
}

void check_compatible(std::size_t model_levels, const LabelTree& tree, const LossWeights* weights) {
  if (model_levels != tree.levels()) {
    throw std::invalid_argument("model has " + std::to_string(model_levels) + " heads, tree has " +
                                std::to_string(tree.levels()) + " levels");
  }
  if (weights && weights->size() != model_levels) {
    throw std::invalid_argument("expected " + std::to_string(model_levels) + " loss weights, got " +
                                std::to_string(weights->size()));
  }
}

}  // namespace

template <typename T>
MetricsRecord train_epoch(BCnnModel<T>& model, const Dataset& data, const LabelTree& tree, const LossWeights& weights,
                          double lr, std::size_t batch_size, Rng& rng, SgdMomentum<T>& optimizer) {
  if (data.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("train_epoch: batch size must be positive");
  check_compatible(model.levels(), tree, &weights);
  const std::size_t levels = model.levels();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const auto params = model.parameters();
  double loss_sum = 0.0;
  std::vector<std::size_t> correct(levels, 0);
  std::size_t seen = 0;
  std::vector<std::size_t> fine(batch_size);

  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    if (n < 2) break;
    const std::span<const std::size_t> rows(order.data() + start, n);
    fine.resize(n);
    for (std::size_t i = 0; i < n; ++i) fine[i] = data.fine_labels[rows[i]];
    const auto targets = tree.derive_targets(fine);

    const auto probs = model.forward(gather_rows<T>(data.images, rows), Mode::Train);
    std::vector<double> level_losses(levels);
    std::vector<BasicTensor<T>> grads(levels);
    for (std::size_t k = 0; k < levels; ++k) {
      level_losses[k] = cross_entropy(probs[k], targets[k]);
      if (weights[k] != 0.0) grads[k] = cross_entropy_logit_grad(probs[k], targets[k], weights[k]);
      const auto pred = argmax_rows(probs[k]);
      for (std::size_t i = 0; i < n; ++i) correct[k] += pred[i] == targets[k][i];
    }
    model.backward(grads);
    optimizer.step(params, lr);

    loss_sum += bcnn_loss(level_losses, weights) * static_cast<double>(n);
    seen += n;
  }
  if (seen == 0) throw std::invalid_argument("train_epoch: dataset too small for a batch of two");

  MetricsRecord record;
  record.learning_rate = lr;
  record.loss_weights.assign(weights.values().begin(), weights.values().end());
  record.train_loss = loss_sum / static_cast<double>(seen);
  for (const auto c : correct) record.train_accuracy.push_back(static_cast<double>(c) / static_cast<double>(seen));
  return record;
}

template <typename T>
std::vector<Labels> predict(BCnnModel<T>& model, const Tensor& images, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("predict: batch size must be positive");
  const std::size_t total = images.empty() ? 0 : images.dim(0);
  std::vector<Labels> out(model.levels());
  for (auto& l : out) l.reserve(total);
  for (std::size_t start = 0; start < total; start += batch_size) {
    const std::size_t n = std::min(batch_size, total - start);
    const auto probs = model.forward(rows_as<T>(images, start, n), Mode::Eval);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const auto pred = argmax_rows(probs[k]);
      out[k].insert(out[k].end(), pred.begin(), pred.end());
    }
  }
  return out;
}

template <typename T>
Evaluation evaluate(BCnnModel<T>& model, const Dataset& data, const LabelTree& tree, std::size_t batch_size) {
  check_compatible(model.levels(), tree, nullptr);
  const auto predictions = predict(model, data.images, batch_size);
  const auto targets = tree.derive_targets(data.fine_labels);
  return {accuracy_per_level(predictions, targets), consistency_rate(tree, predictions)};
}

template <typename T>
FitResult fit(BCnnModel<T>& model, const LabelTree& tree, const Dataset& train, const Dataset& test,
              const FitOptions& options) {
  if (options.epochs == 0) throw std::invalid_argument("fit: epochs must be positive");
  check_compatible(model.levels(), tree, nullptr);
  validate_loss_weight_schedule(options.weight_schedule, model.levels());
  if (options.lr_schedule.width() != 1) throw std::invalid_argument("fit: learning-rate schedule needs one value");
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  Rng rng = make_rng(options.seed, "shuffle");
  SgdMomentum<T> optimizer;
  FitResult result;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const double lr = options.lr_schedule.value_at_epoch(epoch).front();
    const LossWeights weights(options.weight_schedule.value_at_epoch(epoch));
    MetricsRecord record = train_epoch(model, train, tree, weights, lr, options.batch_size, rng, optimizer);
    record.epoch = epoch;
    record.test_accuracy = evaluate(model, test, tree).accuracy;
    result.history.push_back(record);

    const bool improved = record.test_accuracy.back() > best;
    if (improved) {
      best = record.test_accuracy.back();
      result.best_epoch = epoch;
    }
    if (!options.out_dir.empty()) {
      write_metrics_csv(result.history, options.out_dir / "history.csv");
      save_checkpoint(model, options.out_dir / "final.ckpt");
      if (improved) save_checkpoint(model, options.out_dir / "best.ckpt");
    }
    if (options.log) {
      auto& log = *options.log;
      log << "epoch " << epoch << " lr=" << lr << " weights=";
      for (std::size_t k = 0; k < weights.size(); ++k) log << (k ? " " : "") << weights[k];
      log << " loss=" << record.train_loss << " test_acc=";
      for (std::size_t k = 0; k < record.test_accuracy.size(); ++k) log << (k ? " " : "") << record.test_accuracy[k];
      log << '\n' << std::flush;
    }
  }
  if (options.log) {
    const auto& final_record = result.history.back();
    const auto& best_record = result.history[result.best_epoch - 1];
    *options.log << "final fine test accuracy " << final_record.test_accuracy.back() << " (epoch "
                 << final_record.epoch << "), best " << best_record.test_accuracy.back() << " (epoch "
                 << best_record.epoch << ")\n";
  }
  return result;
}

#define BCNN_INSTANTIATE(T)                                                                                     \
  template MetricsRecord train_epoch(BCnnModel<T>&, const Dataset&, const LabelTree&, const LossWeights&, double, \
                                     std::size_t, Rng&, SgdMomentum<T>&);                                        \
  template std::vector<Labels> predict(BCnnModel<T>&, const Tensor&, std::size_t);                              \
  template Evaluation evaluate(BCnnModel<T>&, const Dataset&, const LabelTree&, std::size_t);                   \
  template FitResult fit(BCnnModel<T>&, const LabelTree&, const Dataset&, const Dataset&, const FitOptions&);
BCNN_INSTANTIATE(float)
BCNN_INSTANTIATE(double)
#undef BCNN_INSTANTIATE

}  // namespace bcnn

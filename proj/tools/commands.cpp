#include <charconv>
#include <chrono>
#include <ostream>
#include <stdexcept>

#include "bcnn/checkpoint.hpp"
#include "bcnn/config.hpp"
#include "bcnn/dataset.hpp"
#include "bcnn/error.hpp"
#include "bcnn/grad_check.hpp"
#include "bcnn/label_tree.hpp"
#include "bcnn/trainer.hpp"
#include "cli.hpp"

namespace bcnn::cli {
namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

RunConfig read_config(const std::filesystem::path& path) {
  try {
    return load_run_config(path);
  } catch (const std::exception& e) {
    throw CommandError(kConfigError, "config " + path.string() + ": " + e.what());
  }
}

LabelTree read_tree(const std::filesystem::path& path) {
  try {
    return load_label_tree(path);
  } catch (const std::exception& e) {
    throw CommandError(kConfigError, "tree " + path.string() + ": " + e.what());
  }
}

LabelTree tree_for(const RunConfig& cfg) {
  const auto fine = dataset_fine_count(cfg.dataset);
  if (cfg.mode == RunMode::Baseline) return LabelTree({fine}, {});
  auto tree = read_tree(cfg.tree_path);
  if (tree.fine_count() != fine) {
    throw CommandError(kConfigError, "tree " + cfg.tree_path.string() + " has " + std::to_string(tree.fine_count()) +
                                         " fine classes, " + std::string(dataset_name(cfg.dataset)) + " has " +
                                         std::to_string(fine));
  }
  if (tree.levels() != preset_levels(cfg.arch.preset)) {
    throw CommandError(kConfigError, "tree " + cfg.tree_path.string() + " has " + std::to_string(tree.levels()) +
                                         " levels, arch " + std::string(preset_name(cfg.arch.preset)) + " needs " +
                                         std::to_string(preset_levels(cfg.arch.preset)));
  }
  return tree;
}

DatasetSplits load_dataset(DatasetId id, const std::filesystem::path& dir) {
  try {
    switch (id) {
      case DatasetId::Mnist:
        return load_mnist(dir);
      case DatasetId::Cifar10:
        return load_cifar10(dir);
      case DatasetId::Cifar100:
        return load_cifar100(dir);
    }
  } catch (const DataError& e) {
    throw CommandError(kDataError, e.what());
  } catch (const FormatError& e) {
    throw CommandError(kDataError, std::string("malformed dataset file: ") + e.what());
  }
  throw std::logic_error("unknown dataset id");
}

DatasetSplits data_for(const RunConfig& cfg) {
  auto splits = load_dataset(cfg.dataset, cfg.data_dir);
  if (cfg.train_subset) splits.train = splits.train.head(cfg.train_subset);
  if (cfg.test_subset) splits.test = splits.test.head(cfg.test_subset);
  return splits;
}

BCnnModel<float> model_for(const RunConfig& cfg, const LabelTree& tree) {
  if (cfg.mode == RunMode::Baseline) {
    return build_baseline<float>(cfg.arch, tree.fine_count(), cfg.seed, cfg.keep_rate);
  }
  return build_preset<float>(cfg.arch, tree, cfg.seed, cfg.keep_rate);
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const CommandError& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

// Scales the input gradient of the wrapped layer.
class CorruptedBackward final : public Layer<double> {
 public:
  explicit CorruptedBackward(LayerPtr<double> inner) : inner_(std::move(inner)) {}
  std::string_view kind() const override { return inner_->kind(); }
  Shape output_shape(const Shape& input) const override { return inner_->output_shape(input); }
  TensorD forward(const TensorD& input, Mode mode) override { return inner_->forward(input, mode); }
  TensorD backward(const TensorD& grad_output) override {
    auto g = inner_->backward(grad_output);
    for (auto& v : g.data()) v *= 1.5;
    return g;
  }
  std::vector<ParamRef<double>> parameters() override { return inner_->parameters(); }
  void freeze_randomness(bool frozen) override { inner_->freeze_randomness(frozen); }
  std::uint64_t kink_signature() const override { return inner_->kink_signature(); }

 private:
  LayerPtr<double> inner_;
};

// Balanced binary hierarchy with the preset's level count.
LabelTree gradcheck_tree(std::size_t levels) {
  std::vector<std::size_t> counts;
  std::vector<Labels> parents;
  for (std::size_t k = 0; k < levels; ++k) {
    counts.push_back(std::size_t{2} << k);
    if (k == 0) continue;
    Labels p(counts.back());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i / 2;
    parents.push_back(std::move(p));
  }
  return LabelTree(std::move(counts), std::move(parents));
}

}  // namespace

FitResult run_training(const RunConfig& cfg, std::ostream& log) {
  const auto tree = tree_for(cfg);
  const auto data = data_for(cfg);
  auto model = model_for(cfg, tree);
  log << "train=" << data.train.size() << " test=" << data.test.size() << " params=" << model.param_count() << '\n';

  FitOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.lr_schedule = cfg.lr_schedule;
  options.weight_schedule = cfg.loss_weight_schedule;
  options.seed = cfg.seed;
  options.out_dir = cfg.out_dir;
  options.log = &log;
  return fit(model, tree, data.train, data.test, options);
}

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = read_config(config_path);
    out << describe(cfg) << std::flush;
    run_training(cfg, out);
    return int{kOk};
  });
}

int cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& config_path,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = read_config(config_path);
    const auto tree = tree_for(cfg);
    auto model = model_for(cfg, tree);
    try {
      load_checkpoint(checkpoint_path, model);
    } catch (const std::exception& e) {
      throw CommandError(kConfigError, "checkpoint " + checkpoint_path.string() + ": " + e.what());
    }
    const auto data = data_for(cfg);
    const auto result = evaluate(model, data.test, tree);
    for (std::size_t k = 0; k < result.accuracy.size(); ++k) {
      out << "accuracy_level" << k + 1 << '=' << fmt(result.accuracy[k]) << '\n';
    }
    out << "consistency_rate=" << fmt(result.consistency) << '\n';
    return int{kOk};
  });
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    std::string worst_name;
    double worst = 0.0;
    auto report = [&](const std::string& name, const GradCheckReport& r) {
      const bool ok = r.max_rel_error <= options.tolerance;
      out << name << " max_rel_error=" << fmt(r.max_rel_error) << " entries=" << r.entries
          << " skipped_kinks=" << r.skipped_kinks << (ok ? " ok" : " FAIL") << '\n';
      if (r.max_rel_error > worst || worst_name.empty()) {
        worst = r.max_rel_error;
        worst_name = name + " at " + r.worst_entry;
      }
    };

    for (auto& c : layer_type_cases(options.seed)) {
      const std::string kind(c.layer->kind());
      if (options.inject_fault && kind == "relu") c.layer = std::make_unique<CorruptedBackward>(std::move(c.layer));
      report("layer=" + kind, grad_check(*c.layer, c.input, 1e-5, c.mode, options.seed));
    }

    const auto levels = preset_levels(options.arch.preset);
    const auto tree = gradcheck_tree(levels);
    auto model = build_preset<double>(options.arch, tree, options.seed);
    auto shape = model.sample_shape();
    shape.insert(shape.begin(), 4);
    TensorD batch(shape);
    auto rng = make_rng(options.seed, "gradcheck.batch");
    std::uniform_real_distribution<double> pixel(0.0, 1.0);
    for (auto& v : batch.data()) v = pixel(rng);
    std::vector<Labels> targets(levels);
    for (std::size_t k = 0; k < levels; ++k) {
      for (std::size_t i = 0; i < 4; ++i) targets[k].push_back(tree.ancestor(levels, (i * 3) % tree.fine_count(), k + 1));
    }
    const std::vector<double> w(levels, 1.0 / static_cast<double>(levels));
    report("model=" + std::string(preset_name(options.arch.preset)) + "/" + std::to_string(options.arch.width_divisor),
           grad_check_model(model, batch, targets, LossWeights(w)));

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    out << "worst=" << fmt(worst) << " (" << worst_name << ") seconds=" << fmt(elapsed.count()) << '\n';
    if (worst > options.tolerance) {
      err << "gradient check failed: " << worst_name << " relative error " << fmt(worst) << " > "
          << fmt(options.tolerance) << '\n';
      return int{kRuntimeFailure};
    }
    return int{kOk};
  });
}

int cmd_tree(const std::filesystem::path& tree_path, const std::optional<std::filesystem::path>& dataset_dir,
             const std::string& kind, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto tree = read_tree(tree_path);
    out << "levels=" << tree.levels() << " counts=";
    for (std::size_t k = 1; k <= tree.levels(); ++k) out << (k > 1 ? "," : "") << tree.count(k);
    out << '\n';
    for (std::size_t k = 1; k <= tree.levels(); ++k) {
      out << "level" << k << ':';
      for (std::size_t c = 0; c < tree.count(k); ++c) {
        out << ' ' << c;
        if (!tree.name(k, c).empty()) out << '=' << tree.name(k, c);
        if (k > 1) out << "<" << tree.parent(k, c);
      }
      out << '\n';
    }
    if (!dataset_dir) return int{kOk};

    DatasetId id = DatasetId::Cifar100;
    if (tree.fine_count() != 100) {
      if (kind == "mnist") {
        id = DatasetId::Mnist;
      } else if (kind == "cifar10" || kind.empty()) {
        id = DatasetId::Cifar10;
      } else {
        throw CommandError(kConfigError, "unknown dataset kind '" + kind + "'");
      }
    }
    if (tree.fine_count() != dataset_fine_count(id)) {
      throw CommandError(kConfigError, "tree has " + std::to_string(tree.fine_count()) + " fine classes, " +
                                           std::string(dataset_name(id)) + " has " +
                                           std::to_string(dataset_fine_count(id)));
    }
    const auto splits = load_dataset(id, *dataset_dir);
    std::size_t mismatches = 0;
    bool provided = false;
    for (const Dataset* d : {&splits.train, &splits.test}) {
      if (d->coarse_labels && tree.levels() >= 2) {
        provided = true;
        mismatches += check_dataset_consistency(tree, d->fine_labels, *d->coarse_labels, tree.levels() - 1).mismatches;
      }
    }
    out << "dataset=" << dataset_name(id) << " samples=" << splits.train.size() + splits.test.size()
        << " provided_coarse_labels=" << (provided ? "yes" : "no") << '\n';
    out << "mismatches=" << mismatches << '\n';
    return int{kOk};
  });
}

}  // namespace bcnn::cli

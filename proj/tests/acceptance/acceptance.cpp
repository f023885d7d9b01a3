// Acceptance criteria runner. One criterion per invocation:
//   bcnn_acceptance <criterion> --data-dir <dir> --work-dir <dir>
// prints exactly one "PASS <criterion>: ..." or "FAIL <criterion>: ..." line
// (progress and sub-check lines are indented) and exits 0 only on PASS.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "bcnn/checkpoint.hpp"
#include "bcnn/config.hpp"
#include "bcnn/dataset.hpp"
#include "bcnn/label_tree.hpp"
#include "bcnn/objective.hpp"
#include "bcnn/optimizer.hpp"
#include "bcnn/trainer.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using namespace bcnn;

namespace {

// Pinned thresholds.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kLossTolerance = 1e-12;
constexpr double kMnistFullAccuracy = 0.990;
constexpr double kMnistCiAccuracy = 0.970;
constexpr double kMnistCiSeconds = 600.0;
constexpr double kCoarseOverFineMargin = 0.05;
constexpr double kOrderingSlack = 0.01;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Env {
  fs::path source_dir;
  fs::path data_dir;
  fs::path work_dir;
};

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::ostream& note() { return std::cout << "  "; }

void check(Verdict& v, bool ok, const std::string& what) {
  note() << (ok ? "ok   " : "FAIL ") << what << '\n';
  if (!ok) {
    v.pass = false;
    v.detail += (v.detail.empty() ? "" : "; ") + what;
  }
}

std::string pct(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::fixed << 100.0 * v << '%';
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunConfig shipped(const Env& env, const std::string& name) {
  const auto dir = env.source_dir / "configs";
  return parse_run_config(slurp(dir / (name + ".conf")), dir, env.data_dir);
}

FitResult train(RunConfig cfg, const fs::path& out_dir) {
  cfg.out_dir = out_dir;
  note() << "training " << out_dir.filename().string() << " (seed " << cfg.seed << ")\n";
  return cli::run_training(cfg, std::cout);
}

Verdict gradient_fidelity(const Env&) {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const int code = cli::cmd_gradcheck({{Preset::A, 4}, 0, kGradTolerance, false}, out, err);
  const double elapsed = seconds_since(start);
  std::istringstream lines(out.str() + err.str());
  for (std::string line; std::getline(lines, line);) note() << line << '\n';
  check(v, code == 0, "every layer type and preset A/4 within " + sci(kGradTolerance));
  check(v, elapsed < kGradSeconds, "runtime " + std::to_string(elapsed) + " s < 60 s");
  if (v.pass) v.detail = "max relative error <= 1e-4 in " + std::to_string(elapsed) + " s";
  return v;
}

template <typename T>
std::map<std::string, BasicTensor<T>> copy_params(std::vector<ParamRef<T>> refs) {
  std::map<std::string, BasicTensor<T>> out;
  for (auto& r : refs) out.emplace(r.name, *r.value);
  return out;
}

Verdict degenerate_weight_equivalence(const Env& env) {
  Verdict v;
  struct Case {
    Preset preset;
    std::string tree;
    DatasetId dataset;
  };
  const std::vector<Case> cases{{Preset::A, "mnist.tree", DatasetId::Mnist},
                                {Preset::B, "cifar10.tree", DatasetId::Cifar10}};
  for (const auto& c : cases) {
    const auto name = std::string(preset_name(c.preset));
    const auto tree = load_label_tree(env.source_dir / "trees" / c.tree);
    const auto levels = tree.levels();
    const auto splits = c.dataset == DatasetId::Mnist ? load_mnist(env.data_dir) : load_cifar10(env.data_dir);

    // Loss identity, double precision, against the baseline network with
    // the same seed (shared layers initialize identically).
    auto model = build_preset<double>({c.preset, 8}, tree, 7);
    auto baseline = build_baseline<double>({c.preset, 8}, tree.fine_count(), 7);
    const auto batch = splits.train.head(64);
    const auto images = batch.images.cast<double>();
    const auto targets = tree.derive_targets(batch.fine_labels);
    const auto probs = model.forward(images, Mode::Eval);
    std::vector<double> losses;
    for (std::size_t k = 0; k < levels; ++k) losses.push_back(cross_entropy(probs[k], targets[k]));
    const double weighted = bcnn_loss(losses, LossWeights::fine_only(levels));
    const double plain = cross_entropy(baseline.forward(images, Mode::Eval)[0], targets.back());
    check(v, std::abs(weighted - losses.back()) <= kLossTolerance,
          name + ": weighted loss equals fine cross-entropy (diff " + sci(std::abs(weighted - losses.back())) + ")");
    check(v, std::abs(weighted - plain) <= kLossTolerance,
          name + ": weighted loss equals baseline cross-entropy (diff " + sci(std::abs(weighted - plain)) + ")");

    // One epoch with all weight on the fine level.
    auto trained = build_preset<float>({c.preset, c.preset == Preset::A ? 1u : 4u}, tree, 3);
    std::vector<std::map<std::string, Tensor>> before;
    for (std::size_t k = 1; k < levels; ++k) before.push_back(copy_params(trained.head_parameters(k)));
    const auto fine_before = copy_params(trained.head_parameters(levels));
    auto rng = make_rng(3, "acceptance.shuffle");
    SgdMomentum<float> sgd;
    train_epoch(trained, splits.train.head(2048), tree, LossWeights::fine_only(levels), 0.01, kDefaultBatchSize, rng,
                sgd);
    bool untouched = true;
    std::size_t checked = 0;
    for (std::size_t k = 1; k < levels; ++k) {
      for (auto& p : trained.head_parameters(k)) {
        untouched = untouched && bitwise_equal(*p.value, before[k - 1].at(p.name));
        ++checked;
      }
    }
    bool fine_moved = false;
    for (auto& p : trained.head_parameters(levels)) fine_moved = fine_moved || !bitwise_equal(*p.value, fine_before.at(p.name));
    check(v, untouched, name + ": " + std::to_string(checked) + " coarse-branch tensors bitwise unchanged after one epoch");
    check(v, fine_moved, name + ": fine head did train");
  }
  if (v.pass) v.detail = "A=[0,..,0,1] loss equals plain cross-entropy; coarse branches frozen (presets A, B)";
  return v;
}

Verdict schedule_reproduction(const Env& env) {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  using Points = std::vector<std::pair<std::size_t, std::vector<double>>>;
  auto expect = [&](const std::string& config, const ScheduleTable& s, const Points& points, const char* what) {
    for (const auto& [epoch, values] : points) {
      const auto& got = s.value_at_epoch(epoch);
      if (got != values) check(v, false, config + " " + what + " at epoch " + std::to_string(epoch));
    }
  };
  // Piecewise constant: the value holds up to the epoch before the next change point.
  const Points mnist_w{{1, {0.98, 0.02}}, {11, {0.98, 0.02}}, {12, {0.60, 0.40}}, {17, {0.60, 0.40}},
                       {18, {0.20, 0.80}}, {21, {0.20, 0.80}}, {22, {0.0, 1.0}},   {40, {0.0, 1.0}}};
  const Points mnist_lr{{1, {0.01}}, {28, {0.01}}, {29, {0.002}}, {35, {0.002}}, {36, {0.0004}}, {40, {0.0004}}};
  const Points c10_w{{1, {0.98, 0.01, 0.01}}, {9, {0.98, 0.01, 0.01}}, {10, {0.10, 0.80, 0.10}},
                     {19, {0.10, 0.80, 0.10}}, {20, {0.1, 0.2, 0.7}},    {29, {0.1, 0.2, 0.7}},
                     {30, {0.0, 0.0, 1.0}},     {60, {0.0, 0.0, 1.0}}};
  const Points c10_lr{{1, {0.003}}, {42, {0.003}}, {43, {0.0005}}, {52, {0.0005}}, {53, {0.0001}}, {60, {0.0001}}};
  const Points c100_w{{1, {0.98, 0.01, 0.01}}, {14, {0.98, 0.01, 0.01}}, {15, {0.10, 0.80, 0.10}},
                      {24, {0.10, 0.80, 0.10}}, {25, {0.1, 0.2, 0.7}},    {34, {0.1, 0.2, 0.7}},
                      {35, {0.0, 0.0, 1.0}},     {80, {0.0, 0.0, 1.0}}};
  const Points c100_lr{{1, {0.001}}, {54, {0.001}}, {55, {0.0002}}, {70, {0.0002}}, {71, {0.00005}}, {80, {0.00005}}};
  const Points hier_w{{1, {0.33, 0.33, 0.34}}, {60, {0.33, 0.33, 0.34}}};
  const Points hier_lr{{1, {0.003}}, {41, {0.003}}, {42, {0.0005}}, {52, {0.0005}}, {53, {0.0001}}};

  std::size_t configs = 0;
  for (const char* name : {"mnist_bcnn", "mnist_baseline"}) {
    const auto c = shipped(env, name);
    if (c.mode == RunMode::BCnn) expect(name, c.loss_weight_schedule, mnist_w, "loss weights");
    expect(name, c.lr_schedule, mnist_lr, "lr");
    ++configs;
  }
  for (const char* name : {"cifar10_bcnn_B", "cifar10_bcnn_C", "cifar10_baseline_B", "cifar10_baseline_C"}) {
    const auto c = shipped(env, name);
    if (c.mode == RunMode::BCnn) expect(name, c.loss_weight_schedule, c10_w, "loss weights");
    expect(name, c.lr_schedule, c10_lr, "lr");
    ++configs;
  }
  for (const char* name : {"cifar100_bcnn_B", "cifar100_bcnn_C", "cifar100_baseline_B", "cifar100_baseline_C"}) {
    const auto c = shipped(env, name);
    if (c.mode == RunMode::BCnn) expect(name, c.loss_weight_schedule, c100_w, "loss weights");
    expect(name, c.lr_schedule, c100_lr, "lr");
    ++configs;
  }
  const auto h = shipped(env, "cifar10_hierarchy");
  expect("cifar10_hierarchy", h.loss_weight_schedule, hier_w, "loss weights");
  expect("cifar10_hierarchy", h.lr_schedule, hier_lr, "lr");
  ++configs;
  const double elapsed = seconds_since(start);
  check(v, elapsed < 1.0, "runtime " + std::to_string(elapsed) + " s < 1 s");
  if (v.pass) v.detail = "every published point reproduced exactly across " + std::to_string(configs) + " configs";
  return v;
}

Verdict mnist_full(const Env& env) {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  const auto r = train(shipped(env, "mnist_bcnn"), env.work_dir / "mnist_full");
  const auto& last = r.history.back();
  const double acc = last.test_accuracy.back();
  check(v, last.epoch == 40, "40 epochs run");
  check(v, acc >= kMnistFullAccuracy, "final fine test accuracy " + pct(acc) + " >= 99.00%");
  v.detail = "final " + pct(acc) + ", best " + pct(r.history[r.best_epoch - 1].test_accuracy.back()) + " (epoch " +
             std::to_string(r.best_epoch) + "), " + std::to_string(static_cast<int>(seconds_since(start))) + " s" +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict mnist_ci(const Env& env) {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  const auto r = train(shipped(env, "mnist_bcnn_ci"), env.work_dir / "mnist_ci");
  const double elapsed = seconds_since(start);
  const double acc = r.history.back().test_accuracy.back();
  check(v, acc >= kMnistCiAccuracy, "final fine test accuracy " + pct(acc) + " >= 97.00%");
  check(v, elapsed < kMnistCiSeconds, "runtime " + std::to_string(static_cast<int>(elapsed)) + " s < 600 s");
  v.detail = "final " + pct(acc) + " in " + std::to_string(static_cast<int>(elapsed)) + " s" +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict hierarchical_ordering(const Env& env) {
  Verdict v;
  std::string summary;
  for (auto seed : kSeeds) {
    auto cfg = shipped(env, "cifar10_hierarchy_desk");
    cfg.seed = seed;
    const auto r = train(cfg, env.work_dir / ("hierarchy_seed" + std::to_string(seed)));
    const auto& a = r.history.back().test_accuracy;
    const auto s = "seed " + std::to_string(seed) + ": " + pct(a[0]) + " / " + pct(a[1]) + " / " + pct(a[2]);
    summary += (summary.empty() ? "" : ", ") + s;
    check(v, a[0] - a[2] >= kCoarseOverFineMargin, s + ": coarse-1 exceeds fine by >= 5pp");
    check(v, a[0] + kOrderingSlack >= a[1] && a[1] + kOrderingSlack >= a[2], s + ": coarse-1 >= coarse-2 >= fine (1pp slack)");
  }
  v.detail = summary + (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict bcnn_vs_baseline(const Env& env) {
  Verdict v;
  std::vector<double> bcnn, base;
  for (auto seed : kSeeds) {
    auto b = shipped(env, "cifar10_bcnn_B_desk");
    b.seed = seed;
    bcnn.push_back(train(b, env.work_dir / ("bcnn_B_seed" + std::to_string(seed))).history.back().test_accuracy.back());
    auto c = shipped(env, "cifar10_baseline_B_desk");
    c.seed = seed;
    base.push_back(train(c, env.work_dir / ("baseline_B_seed" + std::to_string(seed))).history.back().test_accuracy.back());
    note() << "seed " << seed << ": B-CNN " << pct(bcnn.back()) << ", baseline " << pct(base.back()) << '\n';
  }
  const double mb = std::accumulate(bcnn.begin(), bcnn.end(), 0.0) / static_cast<double>(bcnn.size());
  const double ma = std::accumulate(base.begin(), base.end(), 0.0) / static_cast<double>(base.size());
  check(v, mb >= ma, "mean B-CNN fine accuracy " + pct(mb) + " >= mean baseline " + pct(ma));
  v.detail = "mean B-CNN " + pct(mb) + " vs baseline " + pct(ma) + (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict data_format_exactness(const Env& env) {
  Verdict v;
  try {
    const auto mnist = load_mnist(env.data_dir);
    check(v, mnist.train.size() == 60000 && mnist.test.size() == 10000,
          "mnist split sizes " + std::to_string(mnist.train.size()) + "/" + std::to_string(mnist.test.size()));
    check(v, mnist.test.fine_labels.at(0) == 7, "first mnist test label = " + std::to_string(mnist.test.fine_labels[0]));
  } catch (const std::exception& e) {
    check(v, false, std::string("mnist: ") + e.what());
  }
  try {
    const auto c10 = load_cifar10(env.data_dir);
    check(v, c10.train.size() == 50000 && c10.test.size() == 10000,
          "cifar10 split sizes " + std::to_string(c10.train.size()) + "/" + std::to_string(c10.test.size()));
  } catch (const std::exception& e) {
    check(v, false, std::string("cifar10: ") + e.what());
  }
  try {
    const auto c100 = load_cifar100(env.data_dir);
    check(v, c100.train.size() == 50000 && c100.test.size() == 10000,
          "cifar100 split sizes " + std::to_string(c100.train.size()) + "/" + std::to_string(c100.test.size()));
    const auto tree = load_label_tree(env.source_dir / "trees" / "cifar100.tree");
    std::size_t mismatches = 0;
    for (const auto* d : {&c100.train, &c100.test}) {
      mismatches += check_dataset_consistency(tree, d->fine_labels, *d->coarse_labels, 2).mismatches;
    }
    check(v, mismatches == 0, "cifar100 provided coarse labels vs tree level 2: " + std::to_string(mismatches) + " mismatches");
  } catch (const std::exception& e) {
    check(v, false, std::string("cifar100 unavailable: ") + e.what());
  }

  // End-to-end determinism on a small real-data run.
  auto cfg = shipped(env, "mnist_bcnn_ci");
  cfg.arch.width_divisor = 4;
  cfg.epochs = 2;
  cfg.train_subset = 2000;
  cfg.test_subset = 1000;
  train(cfg, env.work_dir / "determinism_a");
  train(cfg, env.work_dir / "determinism_b");
  const auto ha = slurp(env.work_dir / "determinism_a" / "history.csv");
  check(v, !ha.empty() && ha == slurp(env.work_dir / "determinism_b" / "history.csv"),
        "fixed-seed runs produce byte-identical history.csv");

  // Checkpoint round trip: reload into a differently seeded model, re-encode.
  const auto ckpt = env.work_dir / "determinism_a" / "final.ckpt";
  const auto tree = load_label_tree(cfg.tree_path);
  auto fresh = build_preset<float>(cfg.arch, tree, cfg.seed + 100);
  load_checkpoint(ckpt, fresh);
  const auto bytes = encode_checkpoint(snapshot(fresh));
  const auto file = slurp(ckpt);
  check(v, std::string(bytes.begin(), bytes.end()) == file, "checkpoint round trip is bitwise identical");

  if (v.pass) v.detail = "split sizes, first label, tree consistency, determinism and checkpoints exact";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<Verdict(const Env&)>> criteria{
      {"gradient_fidelity", gradient_fidelity},
      {"degenerate_weight_equivalence", degenerate_weight_equivalence},
      {"schedule_reproduction", schedule_reproduction},
      {"mnist_full", mnist_full},
      {"mnist_ci", mnist_ci},
      {"hierarchical_ordering", hierarchical_ordering},
      {"bcnn_vs_baseline", bcnn_vs_baseline},
      {"data_format_exactness", data_format_exactness},
  };

  CLI::App app{"B-CNN acceptance criteria"};
  std::string name;
  Env env{BCNN_SOURCE_DIR, {}, fs::temp_directory_path() / "bcnn_acceptance"};
  std::vector<std::string> names;
  for (const auto& [n, fn] : criteria) names.push_back(n);
  app.add_option("criterion", name)->required()->check(CLI::IsMember(names));
  app.add_option("--data-dir", env.data_dir, "Directory holding mnist/, cifar10/, cifar100/")->required();
  app.add_option("--work-dir", env.work_dir, "Scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);

  Verdict v;
  try {
    fs::create_directories(env.work_dir);
    v = criteria.at(name)(env);
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  return v.pass ? 0 : 1;
}

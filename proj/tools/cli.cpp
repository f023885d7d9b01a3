#include <ostream>

#include "CLI11.hpp"
#include "bcnn/blas.hpp"
#include "cli.hpp"

namespace bcnn::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branch CNN trainer"};
  app.require_subcommand(1);

  std::string config, checkpoint;
  auto* train = app.add_subcommand("train", "Train a model described by a config file");
  train->add_option("config", config, "Config file")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the config's test split");
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("config", config, "Config file")->required();

  GradcheckOptions gc;
  std::string arch = "A";
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer type and a reduced model");
  gradcheck->add_option("--arch", arch, "Preset")->check(CLI::IsMember({"A", "B", "C"}));
  gradcheck->add_option("--divisor", gc.arch.width_divisor, "Width divisor")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc.seed, "Seed");
  gradcheck->add_flag("--inject-fault", gc.inject_fault)->group("");

  std::string tree_path, kind;
  std::optional<std::string> dataset;
  auto* tree = app.add_subcommand("tree", "Validate and print a label tree");
  tree->add_option("tree", tree_path, "Tree file")->required();
  tree->add_option("--dataset", dataset, "Dataset directory to check against");
  tree->add_option("--kind", kind, "Dataset for 10-class trees")->check(CLI::IsMember({"mnist", "cifar10"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) {
      err << sub->help();
      return kConfigError;
    }
    err << app.help();
    return kConfigError;
  }

  if (!*tree) {
    if (const auto hint = blas_coretype_hint()) {
      err << "warning: OpenBLAS picked its generic " << blas_kernel_name()
          << " kernels on a CPU with wider SIMD; rerun with OPENBLAS_CORETYPE=" << *hint
          << " in the environment for a several-fold speedup\n";
    }
  }

  if (*train) return cmd_train(config, out, err);
  if (*eval) return cmd_eval(checkpoint, config, out, err);
  if (*gradcheck) {
    gc.arch.preset = arch == "A" ? Preset::A : arch == "B" ? Preset::B : Preset::C;
    return cmd_gradcheck(gc, out, err);
  }
  std::optional<std::filesystem::path> dir;
  if (dataset) dir = *dataset;
  return cmd_tree(tree_path, dir, kind, out, err);
}

}  // namespace bcnn::cli

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "bcnn/config.hpp"
#include "bcnn/model.hpp"
#include "bcnn/trainer.hpp"

namespace bcnn::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kConfigError = 2,  // also incompatible checkpoints and invalid trees
  kDataError = 3,
};

/// Failure carrying the exit code it maps to.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

/// Loads tree and data for `config`, builds the model and runs fit(),
/// logging to `log`. Throws CommandError for config and data problems.
FitResult run_training(const RunConfig& config, std::ostream& log);

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& config_path,
             std::ostream& out, std::ostream& err);

struct GradcheckOptions {
  ArchitecturePreset arch{Preset::A, 4};
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  bool inject_fault = false;  // test hook: corrupts the relu backward
};
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);

/// `dataset_dir` holds the data for the tree's fine count (100 classes:
/// CIFAR-100, 10: `kind`, default cifar10).
int cmd_tree(const std::filesystem::path& tree_path, const std::optional<std::filesystem::path>& dataset_dir,
             const std::string& kind, std::ostream& out, std::ostream& err);

/// Full argument parsing and dispatch; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bcnn::cli

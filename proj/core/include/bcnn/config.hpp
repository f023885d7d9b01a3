#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bcnn/model.hpp"
#include "bcnn/schedule.hpp"

namespace bcnn {

/// Semantically invalid configuration (the syntax parsed fine).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetId { Mnist, Cifar10, Cifar100 };
enum class RunMode { BCnn, Baseline };

std::string_view dataset_name(DatasetId id);
std::size_t dataset_fine_count(DatasetId id);

/// Experiment description. Paths are absolute or relative to the working
/// directory once loaded (config-relative paths are resolved).
struct RunConfig {
  DatasetId dataset = DatasetId::Mnist;
  std::filesystem::path data_dir;
  ArchitecturePreset arch;
  std::filesystem::path tree_path;  // unused in baseline mode
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  ScheduleTable lr_schedule;
  ScheduleTable loss_weight_schedule;  // [1] in baseline mode
  std::filesystem::path out_dir;
  RunMode mode = RunMode::BCnn;
  std::size_t train_subset = 0;  // 0: whole split
  std::size_t test_subset = 0;
  double keep_rate = 0.5;
};

/// Line-oriented "key = value" text; '#' starts a comment. Keys:
///   dataset (mnist|cifar10|cifar100), data_dir, arch (A|B|C), width_divisor,
///   tree, epochs, batch_size, seed, lr_schedule, loss_weights, out_dir,
///   mode (bcnn|baseline), train_subset, test_subset, keep_rate
/// out_dir defaults to "runs" under the working directory.
/// Relative paths resolve against `base_dir`. data_dir falls back to
/// `env_data_dir`. Syntax errors throw ParseError, inconsistent settings
/// ConfigError.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::optional<std::filesystem::path> env_data_dir = std::nullopt);

/// Reads `path`, resolving relative paths against its directory and using
/// the BCNN_DATA_DIR environment variable as the data_dir fallback.
RunConfig load_run_config(const std::filesystem::path& path);

/// Human-readable echo of the resolved settings, one "key = value" per line.
std::string describe(const RunConfig& config);

}  // namespace bcnn

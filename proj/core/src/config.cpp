#include "bcnn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "bcnn/error.hpp"
#include "bcnn/objective.hpp"

namespace bcnn {

std::string_view dataset_name(DatasetId id) {
  switch (id) {
    case DatasetId::Mnist: return "mnist";
    case DatasetId::Cifar10: return "cifar10";
    case DatasetId::Cifar100: return "cifar100";
  }
  return "?";
}

std::size_t dataset_fine_count(DatasetId id) { return id == DatasetId::Cifar100 ? 100 : 10; }

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename U>
U parse_unsigned(std::string_view text, std::size_t line, std::string_view key) {
  U value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(line, std::string(key) + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir,
                           std::optional<std::filesystem::path> env_data_dir) {
  struct Value {
    std::string text;
    std::size_t line;
  };
  std::map<std::string, Value, std::less<>> values;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key before '='");
    if (value.empty()) throw ParseError(line_no, key + ": missing value");
    if (!values.emplace(key, Value{std::string(value), line_no}).second) {
      throw ParseError(line_no, "duplicate key '" + key + "'");
    }
  }

  static const char* const kKnown[] = {"dataset", "data_dir", "arch",         "width_divisor", "tree",
                                       "epochs",  "batch_size", "seed",       "lr_schedule",   "loss_weights",
                                       "out_dir", "mode",     "train_subset", "test_subset",   "keep_rate"};
  for (const auto& [key, v] : values) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ParseError(v.line, "unknown key '" + key + "'");
    }
  }

  auto get = [&](std::string_view key) -> const Value* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  auto require = [&](std::string_view key) -> const Value& {
    if (const auto* v = get(key)) return *v;
    throw ConfigError("missing required key '" + std::string(key) + "'");
  };
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  auto schedule = [&](const Value& v) {
    try {
      return parse_schedule(v.text);
    } catch (const ParseError& e) {
      throw ParseError(v.line, e.message());
    }
  };

  RunConfig cfg;
  {
    const auto& v = require("dataset");
    if (v.text == "mnist") cfg.dataset = DatasetId::Mnist;
    else if (v.text == "cifar10") cfg.dataset = DatasetId::Cifar10;
    else if (v.text == "cifar100") cfg.dataset = DatasetId::Cifar100;
    else throw ParseError(v.line, "dataset: expected mnist, cifar10 or cifar100, got '" + v.text + "'");
  }
  {
    const auto& v = require("arch");
    try {
      cfg.arch.preset = parse_preset(v.text);
    } catch (const std::invalid_argument& e) {
      throw ParseError(v.line, e.what());
    }
  }
  if (const auto* v = get("width_divisor")) cfg.arch.width_divisor = parse_unsigned<std::size_t>(v->text, v->line, "width_divisor");
  if (cfg.arch.width_divisor == 0) throw ConfigError("width_divisor must be at least 1");
  if (const auto* v = get("mode")) {
    if (v->text == "bcnn") cfg.mode = RunMode::BCnn;
    else if (v->text == "baseline") cfg.mode = RunMode::Baseline;
    else throw ParseError(v->line, "mode: expected bcnn or baseline, got '" + v->text + "'");
  }
  if (const auto* v = get("epochs")) cfg.epochs = parse_unsigned<std::size_t>(v->text, v->line, "epochs");
  if (cfg.epochs == 0) throw ConfigError("epochs must be positive");
  if (const auto* v = get("batch_size")) cfg.batch_size = parse_unsigned<std::size_t>(v->text, v->line, "batch_size");
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (const auto* v = get("seed")) cfg.seed = parse_unsigned<std::uint64_t>(v->text, v->line, "seed");
  if (const auto* v = get("train_subset")) cfg.train_subset = parse_unsigned<std::size_t>(v->text, v->line, "train_subset");
  if (const auto* v = get("test_subset")) cfg.test_subset = parse_unsigned<std::size_t>(v->text, v->line, "test_subset");
  if (const auto* v = get("keep_rate")) {
    const auto res = std::from_chars(v->text.data(), v->text.data() + v->text.size(), cfg.keep_rate);
    if (res.ec != std::errc() || res.ptr != v->text.data() + v->text.size()) {
      throw ParseError(v->line, "keep_rate: malformed number '" + v->text + "'");
    }
    if (!(cfg.keep_rate > 0.0) || cfg.keep_rate > 1.0) throw ConfigError("keep_rate must be in (0, 1]");
  }

  const bool wants_mnist = cfg.arch.preset == Preset::A;
  if (wants_mnist != (cfg.dataset == DatasetId::Mnist)) {
    throw ConfigError("arch " + std::string(preset_name(cfg.arch.preset)) + " takes " +
                      (wants_mnist ? "28x28x1" : "32x32x3") + " inputs, which dataset " +
                      std::string(dataset_name(cfg.dataset)) + " does not provide");
  }

  if (const auto* v = get("data_dir")) {
    cfg.data_dir = resolve(v->text);
  } else if (env_data_dir && !env_data_dir->empty()) {
    cfg.data_dir = *env_data_dir;
  } else {
    throw ConfigError("data_dir is not set and BCNN_DATA_DIR is empty");
  }

  cfg.lr_schedule = schedule(require("lr_schedule"));
  if (cfg.lr_schedule.width() != 1) throw ConfigError("lr_schedule entries need exactly one value");
  for (const auto& e : cfg.lr_schedule.entries()) {
    if (!(e.values.front() > 0.0)) throw ConfigError("learning rates must be positive");
  }

  if (cfg.mode == RunMode::Baseline) {
    cfg.loss_weight_schedule = ScheduleTable(std::vector<ScheduleEntry>{{1, {1.0}}});
  } else {
    cfg.tree_path = resolve(require("tree").text);
    const auto& v = require("loss_weights");
    cfg.loss_weight_schedule = schedule(v);
    try {
      validate_loss_weight_schedule(cfg.loss_weight_schedule, preset_levels(cfg.arch.preset));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("loss_weights: ") + e.what());
    }
  }

  cfg.out_dir = get("out_dir") ? resolve(get("out_dir")->text) : std::filesystem::path("runs");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::optional<std::filesystem::path> env;
  if (const char* dir = std::getenv("BCNN_DATA_DIR")) env = dir;
  try {
    return parse_run_config(ss.str(), path.parent_path(), env);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.message());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string describe(const RunConfig& c) {
  std::ostringstream out;
  out << "dataset = " << dataset_name(c.dataset) << '\n'
      << "data_dir = " << c.data_dir.string() << '\n'
      << "arch = " << preset_name(c.arch.preset) << '\n'
      << "width_divisor = " << c.arch.width_divisor << '\n'
      << "mode = " << (c.mode == RunMode::BCnn ? "bcnn" : "baseline") << '\n';
  if (c.mode == RunMode::BCnn) out << "tree = " << c.tree_path.string() << '\n';
  out << "epochs = " << c.epochs << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "seed = " << c.seed << '\n'
      << "lr_schedule = " << to_string(c.lr_schedule) << '\n'
      << "loss_weights = " << to_string(c.loss_weight_schedule) << '\n'
      << "keep_rate = " << c.keep_rate << '\n'
      << "train_subset = " << c.train_subset << '\n'
      << "test_subset = " << c.test_subset << '\n'
      << "out_dir = " << c.out_dir.string() << '\n';
  return out.str();
}

}  // namespace bcnn

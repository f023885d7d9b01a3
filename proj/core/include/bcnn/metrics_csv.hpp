#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcnn/objective.hpp"

namespace bcnn {

/// Header plus one row per record:
///   epoch,lr,A1..AK,train_loss,train_acc1..K,test_acc1..K
/// Numbers use the shortest round-trip decimal form with '.' separators.
std::string format_metrics_csv(std::span<const MetricsRecord> history);
void write_metrics_csv(std::span<const MetricsRecord> history, const std::filesystem::path& path);

/// Throws ParseError (line number) on malformed input.
std::vector<MetricsRecord> parse_metrics_csv(std::string_view text);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace bcnn

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bcnn {

struct ScheduleEntry {
  std::size_t epoch = 1;  // 1-based, first epoch the values take effect
  std::vector<double> values;

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// Piecewise-constant, epoch-indexed schedule (learning rates or loss
/// weights). Entries are strictly increasing in epoch, start at epoch 1
/// and all carry the same number of values.
class ScheduleTable {
 public:
  ScheduleTable() = default;
  explicit ScheduleTable(std::vector<ScheduleEntry> entries);

  /// Values of the last entry whose epoch is <= `epoch`.
  const std::vector<double>& value_at_epoch(std::size_t epoch) const;

  const std::vector<ScheduleEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t width() const noexcept { return entries_.empty() ? 0 : entries_.front().values.size(); }

  friend bool operator==(const ScheduleTable&, const ScheduleTable&) = default;

 private:
  std::vector<ScheduleEntry> entries_;
};

/// "1:0.98 0.02; 12:0.60 0.40" -> ScheduleTable. Throws ParseError.
ScheduleTable parse_schedule(std::string_view text);
std::string to_string(const ScheduleTable& schedule);

/// Every entry must be a valid LossWeights vector of `levels` values.
void validate_loss_weight_schedule(const ScheduleTable& schedule, std::size_t levels);

/// Rescales change points from a `from_epochs` run to a `to_epochs` run:
/// epoch e moves to 1 + round((e - 1) * to / from).
ScheduleTable rescale_schedule(const ScheduleTable& schedule, std::size_t from_epochs, std::size_t to_epochs);

}  // namespace bcnn

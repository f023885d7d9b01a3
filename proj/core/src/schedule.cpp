#include "bcnn/schedule.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bcnn/error.hpp"
#include "bcnn/objective.hpp"

namespace bcnn {

ScheduleTable::ScheduleTable(std::vector<ScheduleEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) return;
  if (entries_.front().epoch != 1) throw std::invalid_argument("schedule must start at epoch 1");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].values.empty()) throw std::invalid_argument("schedule entry has no values");
    if (entries_[i].values.size() != entries_.front().values.size()) {
      throw std::invalid_argument("schedule entries differ in width at epoch " + std::to_string(entries_[i].epoch));
    }
    if (i > 0 && entries_[i].epoch <= entries_[i - 1].epoch) {
      throw std::invalid_argument("schedule epochs must be strictly increasing");
    }
  }
}

const std::vector<double>& ScheduleTable::value_at_epoch(std::size_t epoch) const {
  if (entries_.empty()) throw std::invalid_argument("value_at_epoch on an empty schedule");
  if (epoch == 0) throw std::invalid_argument("epochs are 1-based");
  const ScheduleEntry* current = &entries_.front();
  for (const auto& e : entries_) {
    if (e.epoch > epoch) break;
    current = &e;
  }
  return current->values;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

}  // namespace

ScheduleTable parse_schedule(std::string_view text) {
  std::vector<ScheduleEntry> entries;
  while (true) {
    const auto semi = text.find(';');
    const std::string_view part = trim(text.substr(0, semi));
    if (!part.empty()) {
      const auto colon = part.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(0, "schedule entry '" + std::string(part) + "' lacks 'epoch:' prefix");
      }
      const auto epoch_text = trim(part.substr(0, colon));
      ScheduleEntry entry;
      auto [ptr, ec] = std::from_chars(epoch_text.data(), epoch_text.data() + epoch_text.size(), entry.epoch);
      if (ec != std::errc{} || ptr != epoch_text.data() + epoch_text.size() || entry.epoch == 0) {
        throw ParseError(0, "bad schedule epoch '" + std::string(epoch_text) + "'");
      }
      std::string_view rest = part.substr(colon + 1);
      while (true) {
        rest = trim(rest);
        if (rest.empty()) break;
        const auto end = rest.find_first_of(" \t");
        const auto token = rest.substr(0, end);
        double v = 0.0;
        auto [p, e] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (e != std::errc{} || p != token.data() + token.size() || !std::isfinite(v)) {
          throw ParseError(0, "bad schedule value '" + std::string(token) + "'");
        }
        entry.values.push_back(v);
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
      }
      if (entry.values.empty()) throw ParseError(0, "schedule entry at epoch " + std::to_string(entry.epoch) + " has no values");
      entries.push_back(std::move(entry));
    }
    if (semi == std::string_view::npos) break;
    text = text.substr(semi + 1);
  }
  if (entries.empty()) throw ParseError(0, "empty schedule");
  try {
    return ScheduleTable(std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
}

std::string to_string(const ScheduleTable& schedule) {
  std::ostringstream out;
  bool first_entry = true;
  for (const auto& e : schedule.entries()) {
    out << (first_entry ? "" : "; ") << e.epoch << ':';
    first_entry = false;
    for (std::size_t i = 0; i < e.values.size(); ++i) out << (i ? " " : "") << e.values[i];
  }
  return out.str();
}

void validate_loss_weight_schedule(const ScheduleTable& schedule, std::size_t levels) {
  if (schedule.empty()) throw std::invalid_argument("loss-weight schedule is empty");
  for (const auto& e : schedule.entries()) {
    if (e.values.size() != levels) {
      throw std::invalid_argument("loss weights at epoch " + std::to_string(e.epoch) + " have " +
                                  std::to_string(e.values.size()) + " values, the tree has " + std::to_string(levels) +
                                  " levels");
    }
    try {
      LossWeights{e.values};
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("loss weights at epoch " + std::to_string(e.epoch) + ": " + err.what());
    }
  }
}

ScheduleTable rescale_schedule(const ScheduleTable& schedule, std::size_t from_epochs, std::size_t to_epochs) {
  if (from_epochs == 0 || to_epochs == 0) throw std::invalid_argument("epoch counts must be positive");
  std::vector<ScheduleEntry> out;
  for (const auto& e : schedule.entries()) {
    const double scaled = static_cast<double>(e.epoch - 1) * static_cast<double>(to_epochs) /
                          static_cast<double>(from_epochs);
    const std::size_t epoch = 1 + static_cast<std::size_t>(std::llround(scaled));
    if (!out.empty() && epoch <= out.back().epoch) {
      out.back().values = e.values;  // collapsed change points keep the later values
    } else {
      out.push_back({epoch, e.values});
    }
  }
  return ScheduleTable(std::move(out));
}

}  // namespace bcnn

#include "bcnn/metrics_csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bcnn/checkpoint.hpp"
#include "bcnn/error.hpp"

namespace bcnn {

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_field(std::string& out, double v) {
  out += ',';
  append_number(out, v);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> header_for(std::size_t levels) {
  std::vector<std::string> cols{"epoch", "lr"};
  for (std::size_t k = 1; k <= levels; ++k) cols.push_back("A" + std::to_string(k));
  cols.emplace_back("train_loss");
  for (std::size_t k = 1; k <= levels; ++k) cols.push_back("train_acc" + std::to_string(k));
  for (std::size_t k = 1; k <= levels; ++k) cols.push_back("test_acc" + std::to_string(k));
  return cols;
}

}  // namespace

std::string format_metrics_csv(std::span<const MetricsRecord> history) {
  const std::size_t levels = history.empty() ? 0 : history.front().loss_weights.size();
  std::string out;
  const auto cols = header_for(levels);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : history) {
    if (r.loss_weights.size() != levels || r.train_accuracy.size() != levels || r.test_accuracy.size() != levels) {
      throw std::invalid_argument("metrics record for epoch " + std::to_string(r.epoch) + " has inconsistent levels");
    }
    out += std::to_string(r.epoch);
    append_field(out, r.learning_rate);
    for (const double a : r.loss_weights) append_field(out, a);
    append_field(out, r.train_loss);
    for (const double a : r.train_accuracy) append_field(out, a);
    for (const double a : r.test_accuracy) append_field(out, a);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(std::span<const MetricsRecord> history, const std::filesystem::path& path) {
  const std::string text = format_metrics_csv(history);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<MetricsRecord> parse_metrics_csv(std::string_view text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || lines.front().empty()) throw ParseError(1, "missing CSV header");
  const auto header = split(lines.front(), ',');
  if (header.size() < 3 || (header.size() - 3) % 3 != 0) throw ParseError(1, "unexpected CSV header");
  const std::size_t levels = (header.size() - 3) / 3;
  const auto expected = header_for(levels);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != expected[i]) throw ParseError(1, "unexpected column '" + std::string(header[i]) + "'");
  }

  std::vector<MetricsRecord> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty() && ln + 1 == lines.size()) break;
    const auto fields = split(lines[ln], ',');
    if (fields.size() != header.size()) {
      throw ParseError(ln + 1, "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    auto number = [&](std::size_t i) {
      double v = 0.0;
      const auto f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(ln + 1, "malformed number '" + std::string(f) + "'");
      }
      return v;
    };
    MetricsRecord r;
    {
      const auto f = fields[0];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), r.epoch);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(ln + 1, "malformed epoch '" + std::string(f) + "'");
      }
    }
    r.learning_rate = number(1);
    for (std::size_t k = 0; k < levels; ++k) r.loss_weights.push_back(number(2 + k));
    r.train_loss = number(2 + levels);
    for (std::size_t k = 0; k < levels; ++k) r.train_accuracy.push_back(number(3 + levels + k));
    for (std::size_t k = 0; k < levels; ++k) r.test_accuracy.push_back(number(3 + 2 * levels + k));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str());
}

}  // namespace bcnn

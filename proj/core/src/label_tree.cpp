#include "bcnn/label_tree.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bcnn/error.hpp"

namespace bcnn {

LabelTree::LabelTree(std::vector<std::size_t> counts, std::vector<Labels> parents,
                     std::vector<std::vector<std::string>> names)
    : counts_(std::move(counts)), parents_(std::move(parents)), names_(std::move(names)) {
  if (counts_.empty()) throw std::invalid_argument("label tree needs at least one level");
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (counts_[k] == 0) {
      throw std::invalid_argument("level " + std::to_string(k + 1) + " has zero classes");
    }
  }
  if (parents_.size() != counts_.size() - 1) {
    throw std::invalid_argument("expected " + std::to_string(counts_.size() - 1) + " parent maps, got " +
                                std::to_string(parents_.size()));
  }
  for (std::size_t k = 1; k < counts_.size(); ++k) {
    const Labels& map = parents_[k - 1];
    if (map.size() != counts_[k]) {
      throw std::invalid_argument("level " + std::to_string(k + 1) + " parent map has " +
                                  std::to_string(map.size()) + " entries, expected " + std::to_string(counts_[k]));
    }
    std::vector<bool> has_child(counts_[k - 1], false);
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map[i] >= counts_[k - 1]) {
        throw std::invalid_argument("level " + std::to_string(k + 1) + " class " + std::to_string(i) +
                                    " has parent " + std::to_string(map[i]) + ", but level " +
                                    std::to_string(k) + " has only " + std::to_string(counts_[k - 1]) +
                                    " classes");
      }
      has_child[map[i]] = true;
    }
    for (std::size_t p = 0; p < has_child.size(); ++p) {
      if (!has_child[p]) {
        throw std::invalid_argument("level " + std::to_string(k) + " class " + std::to_string(p) +
                                    " has no children at level " + std::to_string(k + 1));
      }
    }
  }
  if (names_.empty()) {
    for (std::size_t c : counts_) names_.emplace_back(c);
  } else if (names_.size() != counts_.size()) {
    throw std::invalid_argument("names must cover every level");
  } else {
    for (std::size_t k = 0; k < counts_.size(); ++k) names_[k].resize(counts_[k]);
  }
}

void LabelTree::check_level(std::size_t level) const {
  if (level < 1 || level > levels()) {
    throw std::invalid_argument("level " + std::to_string(level) + " outside 1.." + std::to_string(levels()));
  }
}

std::size_t LabelTree::count(std::size_t level) const {
  check_level(level);
  return counts_[level - 1];
}

std::size_t LabelTree::parent(std::size_t level, std::size_t cls) const {
  check_level(level);
  if (level == 1) throw std::invalid_argument("level 1 classes have no parent");
  if (cls >= counts_[level - 1]) throw std::invalid_argument("class index out of range");
  return parents_[level - 2][cls];
}

std::size_t LabelTree::ancestor(std::size_t level, std::size_t cls, std::size_t target_level) const {
  check_level(level);
  check_level(target_level);
  if (target_level > level) {
    throw std::invalid_argument("ancestor: target level " + std::to_string(target_level) +
                                " is finer than level " + std::to_string(level));
  }
  if (cls >= counts_[level - 1]) {
    throw std::invalid_argument("ancestor: class " + std::to_string(cls) + " out of range at level " +
                                std::to_string(level));
  }
  for (std::size_t k = level; k > target_level; --k) cls = parents_[k - 2][cls];
  return cls;
}

const std::string& LabelTree::name(std::size_t level, std::size_t cls) const {
  check_level(level);
  return names_[level - 1].at(cls);
}

std::vector<Labels> LabelTree::derive_targets(std::span<const std::size_t> fine_labels) const {
  const std::size_t k_levels = levels();
  std::vector<Labels> out(k_levels, Labels(fine_labels.size()));
  for (std::size_t i = 0; i < fine_labels.size(); ++i) {
    std::size_t cls = fine_labels[i];
    if (cls >= fine_count()) {
      throw std::invalid_argument("fine label " + std::to_string(cls) + " at index " + std::to_string(i) +
                                  " is out of range [0, " + std::to_string(fine_count()) + ")");
    }
    out[k_levels - 1][i] = cls;
    for (std::size_t k = k_levels; k > 1; --k) {
      cls = parents_[k - 2][cls];
      out[k - 2][i] = cls;
    }
  }
  return out;
}

std::string LabelTree::to_text() const {
  std::ostringstream out;
  out << levels() << '\n';
  for (std::size_t k = 0; k < counts_.size(); ++k) out << (k ? " " : "") << counts_[k];
  out << '\n';
  for (const Labels& map : parents_) {
    for (std::size_t i = 0; i < map.size(); ++i) out << (i ? " " : "") << map[i];
    out << '\n';
  }
  for (std::size_t k = 0; k < names_.size(); ++k) {
    for (std::size_t i = 0; i < names_[k].size(); ++i) {
      if (!names_[k][i].empty()) out << "name " << k + 1 << ' ' << i << ' ' << names_[k][i] << '\n';
    }
  }
  return out.str();
}

namespace {

struct Line {
  std::size_t number;
  std::string_view text;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || end != token.data() + token.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::size_t> parse_ints(const Line& line, std::size_t expected, std::string_view what) {
  const auto tokens = split_ws(line.text);
  if (tokens.size() != expected) {
    throw ParseError(line.number, std::string(what) + ": expected " + std::to_string(expected) +
                                      " integers, got " + std::to_string(tokens.size()));
  }
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (auto t : tokens) out.push_back(parse_index(t, line.number));
  return out;
}

}  // namespace

LabelTree parse_label_tree(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  while (!text.empty()) {
    ++number;
    const auto nl = text.find('\n');
    std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (!raw.empty()) lines.push_back({number, raw});
  }
  if (lines.empty()) throw ParseError(0, "empty label tree");

  const std::size_t k_levels = parse_ints(lines[0], 1, "level count")[0];
  if (k_levels == 0) throw ParseError(lines[0].number, "level count must be >= 1");
  if (lines.size() < 1 + k_levels) {
    throw ParseError(lines.back().number, "truncated tree: expected class counts and " +
                                              std::to_string(k_levels - 1) + " parent lines");
  }
  const auto counts = parse_ints(lines[1], k_levels, "class counts");
  for (std::size_t k = 0; k < k_levels; ++k) {
    if (counts[k] == 0) throw ParseError(lines[1].number, "level " + std::to_string(k + 1) + " has zero classes");
  }

  std::vector<Labels> parents;
  for (std::size_t k = 2; k <= k_levels; ++k) {
    const Line& line = lines[k];
    auto map = parse_ints(line, counts[k - 1], "parents of level " + std::to_string(k));
    std::vector<bool> has_child(counts[k - 2], false);
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map[i] >= counts[k - 2]) {
        throw ParseError(line.number, "parent " + std::to_string(map[i]) + " of level-" + std::to_string(k) +
                                          " class " + std::to_string(i) + " is out of range [0, " +
                                          std::to_string(counts[k - 2]) + ")");
      }
      has_child[map[i]] = true;
    }
    for (std::size_t p = 0; p < has_child.size(); ++p) {
      if (!has_child[p]) {
        throw ParseError(line.number, "level-" + std::to_string(k - 1) + " class " + std::to_string(p) +
                                          " has no children");
      }
    }
    parents.push_back(std::move(map));
  }

  std::vector<std::vector<std::string>> names;
  for (std::size_t c : counts) names.emplace_back(c);
  for (std::size_t li = 1 + k_levels; li < lines.size(); ++li) {
    const Line& line = lines[li];
    auto rest = line.text;
    auto take = [&](std::string_view what) {
      rest = trim(rest);
      const auto sp = rest.find_first_of(" \t");
      if (sp == std::string_view::npos) throw ParseError(line.number, "name line is missing " + std::string(what));
      auto token = rest.substr(0, sp);
      rest = rest.substr(sp);
      return token;
    };
    if (take("keyword") != "name") {
      throw ParseError(line.number, "unexpected content '" + std::string(line.text) + "'");
    }
    const std::size_t level = parse_index(take("a level"), line.number);
    const std::size_t index = parse_index(take("a class index"), line.number);
    const auto label = trim(rest);
    if (label.empty()) throw ParseError(line.number, "name line is missing the name text");
    if (level < 1 || level > k_levels) throw ParseError(line.number, "name level out of range");
    if (index >= counts[level - 1]) throw ParseError(line.number, "name class index out of range");
    names[level - 1][index] = std::string(label);
  }
  return LabelTree(counts, std::move(parents), std::move(names));
}

LabelTree load_label_tree(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open label tree file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_label_tree(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.message());
  }
}

ConsistencyReport check_dataset_consistency(const LabelTree& tree, std::span<const std::size_t> fine_labels,
                                            std::span<const std::size_t> provided_coarse,
                                            std::size_t coarse_level) {
  if (fine_labels.size() != provided_coarse.size()) {
    throw std::invalid_argument("label arrays differ in length: " + std::to_string(fine_labels.size()) + " vs " +
                                std::to_string(provided_coarse.size()));
  }
  ConsistencyReport report;
  for (std::size_t i = 0; i < fine_labels.size(); ++i) {
    if (tree.ancestor(tree.levels(), fine_labels[i], coarse_level) != provided_coarse[i]) {
      if (!report.first_mismatch) report.first_mismatch = i;
      ++report.mismatches;
    }
  }
  return report;
}

}  // namespace bcnn

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bcnn {

using Labels = std::vector<std::size_t>;

/// K-level class hierarchy. Levels are numbered 1 (coarsest) to K (fine);
/// class indices are 0-based within a level. Immutable once built.
class LabelTree {
 public:
  /// `parents[k - 2]` maps each level-k class to its level-(k-1) parent,
  /// for k = 2..K. `names`, when given, holds one vector per level (empty
  /// strings for unnamed classes). Throws std::invalid_argument when the
  /// maps are out of range or leave a parent without children.
  LabelTree(std::vector<std::size_t> counts, std::vector<Labels> parents,
            std::vector<std::vector<std::string>> names = {});

  std::size_t levels() const noexcept { return counts_.size(); }
  std::size_t count(std::size_t level) const;
  std::span<const std::size_t> counts() const noexcept { return counts_; }
  std::size_t fine_count() const noexcept { return counts_.back(); }

  std::size_t parent(std::size_t level, std::size_t cls) const;

  /// Class at `target_level` reached by walking parents up from (`level`, `cls`).
  std::size_t ancestor(std::size_t level, std::size_t cls, std::size_t target_level) const;

  /// Empty when the tree file gave no name.
  const std::string& name(std::size_t level, std::size_t cls) const;

  /// One label vector per level; level K is the input itself.
  std::vector<Labels> derive_targets(std::span<const std::size_t> fine_labels) const;

  /// Canonical tree-file text; parse_label_tree(to_text()) == *this.
  std::string to_text() const;

  friend bool operator==(const LabelTree&, const LabelTree&) = default;

 private:
  void check_level(std::size_t level) const;

  std::vector<std::size_t> counts_;
  std::vector<Labels> parents_;
  std::vector<std::vector<std::string>> names_;
};

/// Parses the line-oriented tree format:
///   K
///   c_1 ... c_K
///   one line per level k = 2..K with c_k parent indices
///   optional "name <level> <index> <text>" lines
/// '#' starts a comment. Throws ParseError naming the offending line.
LabelTree parse_label_tree(std::string_view text);

/// Reads and parses a tree file; I/O failures throw std::runtime_error.
LabelTree load_label_tree(const std::filesystem::path& path);

struct ConsistencyReport {
  std::size_t mismatches = 0;
  std::optional<std::size_t> first_mismatch;
};

/// Compares labels derived from `fine_labels` at `coarse_level` against
/// labels shipped with a dataset.
ConsistencyReport check_dataset_consistency(const LabelTree& tree, std::span<const std::size_t> fine_labels,
                                            std::span<const std::size_t> provided_coarse,
                                            std::size_t coarse_level);

}  // namespace bcnn

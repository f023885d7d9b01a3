#include <gtest/gtest.h>

#include <random>

#include "bcnn/error.hpp"
#include "bcnn/label_tree.hpp"
#include "test_util.hpp"

namespace bcnn {
namespace {

// Random valid tree: every parent receives at least one child.
LabelTree random_tree(std::mt19937_64& rng) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
  std::vector<std::size_t> counts;
  std::vector<Labels> parents;
  std::size_t prev = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
  counts.push_back(prev);
  for (std::size_t level = 2; level <= k; ++level) {
    const std::size_t c = prev + std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    Labels map(c);
    for (std::size_t i = 0; i < c; ++i) {
      map[i] = i < prev ? i : std::uniform_int_distribution<std::size_t>(0, prev - 1)(rng);
    }
    std::shuffle(map.begin(), map.end(), rng);
    counts.push_back(c);
    parents.push_back(map);
    prev = c;
  }
  return LabelTree(counts, parents);
}

// Walks parents one level at a time.
std::size_t walk(const LabelTree& t, std::size_t level, std::size_t cls, std::size_t target) {
  while (level > target) cls = t.parent(level--, cls);
  return cls;
}

TEST(LabelTree, FlatTree) {
  const auto t = parse_label_tree("1\n10");
  EXPECT_EQ(t.levels(), 1u);
  EXPECT_EQ(t.fine_count(), 10u);
  const Labels fine{3, 9, 0};
  const auto targets = t.derive_targets(fine);
  ASSERT_EQ(targets.size(), 1u);
  EXPECT_EQ(targets[0], fine);
}

TEST(LabelTree, ShippedCifar10Tree) {
  const auto t = load_label_tree(testing::source_path("trees/cifar10.tree"));
  EXPECT_EQ(t.levels(), 3u);
  EXPECT_EQ(std::vector<std::size_t>(t.counts().begin(), t.counts().end()), (std::vector<std::size_t>{2, 7, 10}));
  EXPECT_EQ(t.name(1, 0), "transport");
  EXPECT_EQ(t.name(1, 1), "animal");
  // cat -> pet -> animal; dog shares the pet group; deer and horse share one group.
  EXPECT_EQ(t.name(2, t.ancestor(3, 3, 2)), "pet");
  EXPECT_EQ(t.name(1, t.ancestor(3, 3, 1)), "animal");
  EXPECT_EQ(t.ancestor(3, 5, 2), t.ancestor(3, 3, 2));
  EXPECT_EQ(t.ancestor(3, 4, 2), t.ancestor(3, 7, 2));
  EXPECT_EQ(t.name(1, t.ancestor(3, 0, 1)), "transport");
}

TEST(LabelTree, ShippedMnistTreeGroupsZeroAndSix) {
  const auto t = load_label_tree(testing::source_path("trees/mnist.tree"));
  EXPECT_EQ(t.levels(), 2u);
  const Labels digits{0, 6};
  const auto targets = t.derive_targets(digits);
  EXPECT_EQ(targets[0][0], targets[0][1]);
}

TEST(LabelTree, ShippedCifar100TreeShape) {
  const auto t = load_label_tree(testing::source_path("trees/cifar100.tree"));
  EXPECT_EQ(std::vector<std::size_t>(t.counts().begin(), t.counts().end()), (std::vector<std::size_t>{8, 20, 100}));
  EXPECT_EQ(t.name(2, t.parent(3, 4)), "aquatic_mammals");  // beaver
  EXPECT_EQ(t.name(2, t.parent(3, 99)), "non-insect_invertebrates");  // worm
}

TEST(LabelTree, ParseErrorsNameTheLine) {
  try {
    parse_label_tree("2\n2 3\n0 9 1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_label_tree("2\n2 3\n0 0 0\n"), ParseError);   // class 1 has no child
  EXPECT_THROW(parse_label_tree("2\n2 3\n0 1\n"), ParseError);     // count mismatch
  EXPECT_THROW(parse_label_tree("2\n2 x\n0 1 1\n"), ParseError);   // malformed integer
  EXPECT_THROW(parse_label_tree("2\n2 3\n"), ParseError);          // missing parent line
  EXPECT_THROW(parse_label_tree(""), ParseError);
  try {
    parse_label_tree("# header\n\n2\n2 3\n0 1 1\nname 3 0 x\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

TEST(LabelTree, AncestorIdentityAndErrors) {
  const auto t = parse_label_tree("3\n2 3 5\n0 1 1\n0 1 2 2 0\n");
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(t.ancestor(3, c, 3), c);
  EXPECT_THROW(t.ancestor(2, 0, 3), std::invalid_argument);
  EXPECT_THROW(t.ancestor(3, 5, 1), std::invalid_argument);
}

TEST(LabelTree, RandomTreesComposeAndRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = random_tree(rng);
    const std::size_t K = t.levels();
    EXPECT_EQ(parse_label_tree(t.to_text()), t);
    for (std::size_t k = 1; k <= K; ++k) {
      for (std::size_t c = 0; c < t.count(k); ++c) {
        for (std::size_t m = 1; m <= k; ++m) {
          for (std::size_t j = 1; j <= m; ++j) {
            const auto direct = t.ancestor(k, c, j);
            ASSERT_EQ(direct, t.ancestor(m, t.ancestor(k, c, m), j));
            ASSERT_EQ(direct, walk(t, k, c, j));
            ASSERT_LT(direct, t.count(j));
          }
        }
      }
    }
    Labels fine(20);
    for (auto& f : fine) f = std::uniform_int_distribution<std::size_t>(0, t.fine_count() - 1)(rng);
    const auto targets = t.derive_targets(fine);
    ASSERT_EQ(targets.size(), K);
    EXPECT_EQ(targets.back(), fine);
    for (std::size_t k = 1; k <= K; ++k) {
      for (std::size_t i = 0; i < fine.size(); ++i) {
        ASSERT_EQ(targets[k - 1][i], walk(t, K, fine[i], k));
        ASSERT_LT(targets[k - 1][i], t.count(k));
      }
    }
  }
}

TEST(LabelTree, NamesSurviveRoundTrip) {
  const auto t = load_label_tree(testing::source_path("trees/cifar100.tree"));
  EXPECT_EQ(parse_label_tree(t.to_text()), t);
}

TEST(LabelTree, DeriveTargetsRejectsOutOfRange) {
  const auto t = parse_label_tree("2\n2 3\n0 1 1\n");
  const Labels bad{0, 3};
  EXPECT_THROW(t.derive_targets(bad), std::invalid_argument);
}

TEST(DatasetConsistency, CountsMismatches) {
  const auto t = load_label_tree(testing::source_path("trees/cifar100.tree"));
  Labels fine(300);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = (i * 37) % 100;
  auto coarse = t.derive_targets(fine)[1];
  auto r = check_dataset_consistency(t, fine, coarse, 2);
  EXPECT_EQ(r.mismatches, 0u);
  EXPECT_FALSE(r.first_mismatch);

  coarse[41] = (coarse[41] + 1) % 20;
  r = check_dataset_consistency(t, fine, coarse, 2);
  EXPECT_EQ(r.mismatches, 1u);
  EXPECT_EQ(r.first_mismatch, 41u);

  coarse.pop_back();
  EXPECT_THROW(check_dataset_consistency(t, fine, coarse, 2), std::invalid_argument);
}

}  // namespace
}  // namespace bcnn

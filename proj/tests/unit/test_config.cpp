#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "bcnn/config.hpp"
#include "bcnn/error.hpp"
#include "bcnn/label_tree.hpp"
#include "test_util.hpp"

namespace bcnn {
namespace {

const std::string kMinimal =
    "dataset = mnist\n"
    "arch = A\n"
    "tree = trees/mnist.tree\n"
    "lr_schedule = 1:0.01\n"
    "loss_weights = 1:0.5 0.5\n";

RunConfig parse(const std::string& text) { return parse_run_config(text, "/base", "/data"); }

TEST(Config, Defaults) {
  const auto c = parse(kMinimal);
  EXPECT_EQ(c.dataset, DatasetId::Mnist);
  EXPECT_EQ(c.arch.preset, Preset::A);
  EXPECT_EQ(c.arch.width_divisor, 1u);
  EXPECT_EQ(c.epochs, 40u);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.mode, RunMode::BCnn);
  EXPECT_EQ(c.keep_rate, 0.5);
  EXPECT_EQ(c.tree_path, std::filesystem::path("/base/trees/mnist.tree"));
  EXPECT_EQ(c.data_dir, std::filesystem::path("/data"));
  EXPECT_EQ(c.out_dir, std::filesystem::path("runs"));  // working-directory relative
}

TEST(Config, CommentsWhitespaceAndAbsolutePaths) {
  const auto c = parse("# run\n\n  dataset=cifar10  # trailing\narch = B\nwidth_divisor = 4\n"
                       "tree = /abs/c10.tree\ndata_dir = /elsewhere\nlr_schedule = 1:0.003; 5:0.0005\n"
                       "loss_weights = 1:0.2 0.3 0.5\nseed = 17\nepochs = 9\nmode = bcnn\n"
                       "train_subset = 100\ntest_subset = 50\nkeep_rate = 0.8\nout_dir = out\n");
  EXPECT_EQ(c.dataset, DatasetId::Cifar10);
  EXPECT_EQ(c.arch.preset, Preset::B);
  EXPECT_EQ(c.arch.width_divisor, 4u);
  EXPECT_EQ(c.tree_path, std::filesystem::path("/abs/c10.tree"));
  EXPECT_EQ(c.data_dir, std::filesystem::path("/elsewhere"));
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.epochs, 9u);
  EXPECT_EQ(c.train_subset, 100u);
  EXPECT_EQ(c.test_subset, 50u);
  EXPECT_EQ(c.keep_rate, 0.8);
  EXPECT_EQ(c.out_dir, std::filesystem::path("/base/out"));
  EXPECT_EQ(c.lr_schedule.value_at_epoch(6), std::vector<double>{0.0005});
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of(kMinimal + "bogus = 1\n"), 6u);
  EXPECT_EQ(line_of(kMinimal + "no equals sign\n"), 6u);
  EXPECT_EQ(line_of("dataset = mnist\ndataset = mnist\n"), 2u);
  EXPECT_EQ(line_of(kMinimal + "epochs = ten\n"), 6u);
  EXPECT_EQ(line_of(kMinimal + "epochs = -3\n"), 6u);
  EXPECT_GT(line_of("dataset = mnist\narch = A\ntree = t\nlr_schedule = 1:0.01\nloss_weights = 3:0.5 0.5\n"), 0u);
}

TEST(Config, SemanticErrors) {
  // missing required keys
  EXPECT_THROW(parse("dataset = mnist\n"), ConfigError);
  EXPECT_THROW(parse("arch = A\ntree = t\nlr_schedule = 1:0.1\nloss_weights = 1:0.5 0.5\n"), ConfigError);
  // preset and dataset disagree
  EXPECT_THROW(parse("dataset = cifar10\narch = A\ntree = t\nlr_schedule = 1:0.1\nloss_weights = 1:0.5 0.5\n"),
               ConfigError);
  EXPECT_THROW(parse("dataset = mnist\narch = B\ntree = t\nlr_schedule = 1:0.1\nloss_weights = 1:0.5 0.5\n"),
               ConfigError);
  // weights must match the preset's level count and sum to 1
  EXPECT_THROW(parse("dataset = mnist\narch = A\ntree = t\nlr_schedule = 1:0.1\nloss_weights = 1:0.5 0.6\n"),
               ConfigError);
  EXPECT_THROW(parse("dataset = mnist\narch = A\ntree = t\nlr_schedule = 1:0.1\nloss_weights = 1:0.3 0.3 0.4\n"),
               ConfigError);
  EXPECT_THROW(parse(kMinimal + "keep_rate = 0\n"), ConfigError);
  EXPECT_THROW(parse(kMinimal + "batch_size = 0\n"), ConfigError);
  EXPECT_THROW(parse(kMinimal + "width_divisor = 0\n"), ConfigError);
  EXPECT_THROW(parse(kMinimal + "dataset_extra = 1\n"), ParseError);
  EXPECT_THROW(parse_run_config(kMinimal, "/base"), ConfigError);  // no data_dir anywhere
}

TEST(Config, BaselineIgnoresTreeAndWeights) {
  const auto c = parse("dataset = cifar100\narch = C\nmode = baseline\nlr_schedule = 1:0.003\n");
  EXPECT_EQ(c.mode, RunMode::Baseline);
  EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(1), std::vector<double>{1.0});
}

TEST(Config, DescribeEchoesResolvedSettings) {
  const auto text = describe(parse(kMinimal));
  EXPECT_NE(text.find("dataset = mnist"), std::string::npos);
  EXPECT_NE(text.find("arch = A"), std::string::npos);
  EXPECT_NE(text.find("loss_weights = 1:0.5 0.5"), std::string::npos);
  EXPECT_NE(text.find("/data"), std::string::npos);
}

TEST(Config, EveryShippedConfigLoads) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(testing::source_path("configs"))) {
    const auto text = [&] {
      std::ifstream in(entry.path());
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    const auto c = parse_run_config(text, entry.path().parent_path(), "/data");
    ++n;
    if (c.mode == RunMode::Baseline) continue;
    const auto tree = load_label_tree(c.tree_path);
    EXPECT_EQ(tree.fine_count(), dataset_fine_count(c.dataset)) << entry.path();
    EXPECT_EQ(tree.levels(), c.loss_weight_schedule.width()) << entry.path();
    EXPECT_EQ(tree.levels(), preset_levels(c.arch.preset)) << entry.path();
  }
  EXPECT_GE(n, 15u);
}

}  // namespace
}  // namespace bcnn

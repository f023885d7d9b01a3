#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "bcnn/config.hpp"
#include "bcnn/error.hpp"
#include "bcnn/optimizer.hpp"
#include "bcnn/schedule.hpp"
#include "test_util.hpp"

namespace bcnn {
namespace {

using V = std::vector<double>;

RunConfig shipped(const std::string& name) {
  return parse_run_config(
      [&] {
        std::ifstream in(testing::source_path("configs/" + name));
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
      }(),
      testing::source_path("configs"), std::filesystem::path("/nonexistent-data"));
}

TEST(Schedule, MnistWeights) {
  const auto s = parse_schedule("1:0.98 0.02; 12:0.60 0.40; 18:0.20 0.80; 22:0 1");
  EXPECT_EQ(s.value_at_epoch(1), (V{0.98, 0.02}));
  EXPECT_EQ(s.value_at_epoch(5), (V{0.98, 0.02}));
  EXPECT_EQ(s.value_at_epoch(11), (V{0.98, 0.02}));
  EXPECT_EQ(s.value_at_epoch(12), (V{0.60, 0.40}));
  EXPECT_EQ(s.value_at_epoch(18), (V{0.20, 0.80}));
  EXPECT_EQ(s.value_at_epoch(22), (V{0.0, 1.0}));
  EXPECT_EQ(s.value_at_epoch(50), (V{0.0, 1.0}));
}

TEST(Schedule, PiecewiseConstantBetweenChangePoints) {
  const auto s = parse_schedule("1:3; 4:2; 9:1");
  for (std::size_t e = 1; e <= 12; ++e) {
    const double expected = e < 4 ? 3 : e < 9 ? 2 : 1;
    EXPECT_EQ(s.value_at_epoch(e).front(), expected) << e;
  }
}

TEST(Schedule, Errors) {
  EXPECT_THROW(ScheduleTable().value_at_epoch(1), std::invalid_argument);
  EXPECT_THROW(parse_schedule("1:1").value_at_epoch(0), std::invalid_argument);
  EXPECT_THROW(parse_schedule("2:1"), ParseError);
  EXPECT_THROW(parse_schedule("1:1; 1:2"), ParseError);
  EXPECT_THROW(parse_schedule("1:1; 5:2 3"), ParseError);
  EXPECT_THROW(parse_schedule("1:0.5 x"), ParseError);
  EXPECT_THROW(parse_schedule("0.5 0.5"), ParseError);
  EXPECT_THROW(parse_schedule(""), ParseError);
  EXPECT_THROW(validate_loss_weight_schedule(parse_schedule("1:0.5 0.6"), 2), std::invalid_argument);
  EXPECT_THROW(validate_loss_weight_schedule(parse_schedule("1:0.5 0.5"), 3), std::invalid_argument);
}

TEST(Schedule, TextRoundTrip) {
  const auto s = parse_schedule("1:0.98 0.01 0.01; 10:0.1 0.8 0.1; 20:0.1 0.2 0.7; 30:0 0 1");
  EXPECT_EQ(parse_schedule(to_string(s)), s);
}

TEST(Schedule, Rescale) {
  const auto s = parse_schedule("1:0.98 0.01 0.01; 10:0.1 0.8 0.1; 20:0.1 0.2 0.7; 30:0 0 1");
  const auto r = rescale_schedule(s, 60, 20);
  std::vector<std::size_t> epochs;
  for (const auto& e : r.entries()) epochs.push_back(e.epoch);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{1, 4, 7, 11}));
  EXPECT_EQ(rescale_schedule(s, 60, 60), s);
  // Change points that collide keep the later values.
  const auto c = rescale_schedule(parse_schedule("1:1; 2:2; 3:3"), 10, 2);
  ASSERT_EQ(c.entries().size(), 1u);
  EXPECT_EQ(c.value_at_epoch(1), (V{3}));
}

TEST(Schedule, ShippedConfigsMatchPublishedSchedules) {
  const auto mnist = shipped("mnist_bcnn.conf");
  EXPECT_EQ(mnist.loss_weight_schedule.value_at_epoch(1), (V{0.98, 0.02}));
  EXPECT_EQ(mnist.loss_weight_schedule.value_at_epoch(12), (V{0.60, 0.40}));
  EXPECT_EQ(mnist.loss_weight_schedule.value_at_epoch(18), (V{0.20, 0.80}));
  EXPECT_EQ(mnist.loss_weight_schedule.value_at_epoch(22), (V{0.0, 1.0}));
  EXPECT_EQ(mnist.lr_schedule.value_at_epoch(28), (V{0.01}));
  EXPECT_EQ(mnist.lr_schedule.value_at_epoch(29), (V{0.002}));
  EXPECT_EQ(mnist.lr_schedule.value_at_epoch(35), (V{0.002}));
  EXPECT_EQ(mnist.lr_schedule.value_at_epoch(36), (V{0.0004}));

  for (const char* name : {"cifar10_bcnn_B.conf", "cifar10_bcnn_C.conf"}) {
    const auto c = shipped(name);
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(1), (V{0.98, 0.01, 0.01}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(10), (V{0.10, 0.80, 0.10}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(20), (V{0.1, 0.2, 0.7}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(30), (V{0.0, 0.0, 1.0}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(42), (V{0.003}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(43), (V{0.0005}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(52), (V{0.0005}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(53), (V{0.0001}));
  }
  for (const char* name : {"cifar100_bcnn_B.conf", "cifar100_bcnn_C.conf"}) {
    const auto c = shipped(name);
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(1), (V{0.98, 0.01, 0.01}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(15), (V{0.10, 0.80, 0.10}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(25), (V{0.1, 0.2, 0.7}));
    EXPECT_EQ(c.loss_weight_schedule.value_at_epoch(35), (V{0.0, 0.0, 1.0}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(54), (V{0.001}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(55), (V{0.0002}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(70), (V{0.0002}));
    EXPECT_EQ(c.lr_schedule.value_at_epoch(71), (V{0.00005}));
  }
  const auto h = shipped("cifar10_hierarchy.conf");
  EXPECT_EQ(h.loss_weight_schedule.value_at_epoch(37), (V{0.33, 0.33, 0.34}));
  EXPECT_EQ(h.lr_schedule.value_at_epoch(42), (V{0.0005}));
  EXPECT_EQ(h.lr_schedule.value_at_epoch(53), (V{0.0001}));
}

TEST(Sgd, FirstStepFromZeroVelocity) {
  TensorD p({3}, {1, 2, 3}), g({3}, {0.5, -1, 2}), v({3}, 0.0);
  sgd_momentum_step(p, g, v, 0.1);
  EXPECT_EQ(p, TensorD({3}, {1 - 0.1 * 0.5, 2 + 0.1, 3 - 0.1 * 2}));
}

TEST(Sgd, HandRecurrence) {
  TensorD p({1}, 0.0), g({1}, 1.0), v({1}, 0.0);
  sgd_momentum_step(p, g, v, 0.1);
  EXPECT_NEAR(v[0], -0.1, 1e-15);
  sgd_momentum_step(p, g, v, 0.1);
  EXPECT_NEAR(v[0], -0.19, 1e-15);
  EXPECT_NEAR(p[0], -0.29, 1e-15);
}

TEST(Sgd, VelocityDecaysWithZeroGradient) {
  TensorD p({1}, 0.0), g({1}, 0.0), v({1}, 1.0);
  for (int i = 1; i <= 10; ++i) {
    sgd_momentum_step(p, g, v, 0.1);
    EXPECT_NEAR(v[0], std::pow(0.9, i), 1e-15);
  }
}

TEST(Sgd, ZeroMomentumIsPlainGradientDescent) {
  auto p = testing::random_tensor({20}, 1);
  auto q = p;
  TensorD v({20}, 0.0);
  for (int step = 0; step < 5; ++step) {
    const auto g = testing::random_tensor({20}, 10 + step);
    sgd_momentum_step(p, g, v, 0.05, 0.0);
    for (std::size_t i = 0; i < 20; ++i) q[i] -= 0.05 * g[i];
  }
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
}

TEST(Sgd, ShapeMismatch) {
  TensorD p({3}), g({2}), v({3});
  EXPECT_THROW(sgd_momentum_step(p, g, v, 0.1), ShapeError);
}

TEST(Sgd, OptimizerKeepsOneVelocityPerParameter) {
  TensorD a({2}, 1.0), ga({2}, 1.0), b({3}, 1.0), gb({3}, 2.0);
  const std::vector<ParamRef<double>> params{{"a", &a, &ga}, {"b", &b, &gb}};
  SgdMomentum<double> opt;
  opt.step(params, 0.1);
  opt.step(params, 0.1);
  ASSERT_EQ(opt.velocity().size(), 2u);
  EXPECT_EQ(opt.velocity()[1].shape(), (Shape{3}));
  EXPECT_NEAR(b[0], 1.0 - 0.2 - 0.38, 1e-15);
}

}  // namespace
}  // namespace bcnn

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "darol/mlp.hpp"
#include "darol/train.hpp"

using namespace darol;
using namespace darol::nn;

namespace {

// Flat, index-twiddling reimplementation of the forward pass; the library's
// version must agree to machine precision.
double straight_line_forward(const Subnetwork& sub, const Vec& input, double m) {
  std::vector<double> h(input.begin(), input.end());
  for (std::size_t l = 0; l + 1 < sub.weights.size(); ++l) {
    const auto& w = sub.weights[l];
    std::vector<double> next(w.rows, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
      double acc = sub.biases[l][i];
      for (std::size_t j = 0; j < w.cols; ++j) acc += w.data[i * w.cols + j] * h[j];
      next[i] = acc > 0.0 ? acc : 0.0;
    }
    h = next;
  }
  const auto& out_w = sub.weights.back();
  double acc = sub.biases.back()[0];
  for (std::size_t j = 0; j < out_w.cols; ++j) acc += out_w.data[j] * h[j];
  return std::clamp(acc, -m, m);
}

std::vector<Vec> random_inputs(std::size_t n, std::size_t d, std::uint64_t seed,
                               double scale = 1.0) {
  std::vector<Vec> out(n, Vec(d));
  rng::Stream s = rng::substream(seed, 0);
  for (auto& v : out)
    for (double& x : v) x = scale * s.next_gaussian();
  return out;
}

}  // namespace

TEST(InitNetwork, DeterministicAndShaped) {
  const MlpOperator a = init_network(4, 3, 8, 2, 1.0, 42);
  const MlpOperator b = init_network(4, 3, 8, 2, 1.0, 42);
  ASSERT_EQ(a.subnets.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_EQ(a.subnets[s].weights.size(), 3u);  // 2 hidden + output row
    EXPECT_EQ(a.subnets[s].weights[0].rows, 8u);
    EXPECT_EQ(a.subnets[s].weights[0].cols, 4u);
    EXPECT_EQ(a.subnets[s].weights[2].rows, 1u);
    for (std::size_t l = 0; l < 3; ++l) {
      EXPECT_EQ(a.subnets[s].weights[l].data, b.subnets[s].weights[l].data);
      for (double bias : a.subnets[s].biases[l]) EXPECT_EQ(bias, 0.0);
    }
  }
  EXPECT_NE(init_network(4, 3, 8, 2, 1.0, 43).subnets[0].weights[0].data,
            a.subnets[0].weights[0].data);
  EXPECT_THROW(init_network(0, 1, 1, 1, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(init_network(1, 1, 1, 1, 0.0, 0), std::invalid_argument);
}

TEST(InitNetwork, WeightsFollowTheUniformLaw) {
  // Kolmogorov-Smirnov against U(-limit, limit), pooled over layers after
  // rescaling each layer by its own limit.
  const MlpOperator net = init_network(64, 2, 64, 3, 1.0, 7);
  std::vector<double> pooled;
  for (const auto& sub : net.subnets) {
    for (const auto& w : sub.weights) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.cols + w.rows));
      for (double v : w.data) pooled.push_back(v / limit);  // now U(-1, 1)
    }
  }
  ASSERT_GE(pooled.size(), 20000u);
  std::sort(pooled.begin(), pooled.end());
  double ks = 0.0;
  const double n = static_cast<double>(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double cdf = 0.5 * (pooled[i] + 1.0);
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i + 1) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(n));  // 1% critical value
}

TEST(Forward, ReluDefinitionOnHandBuiltNet) {
  MlpOperator net = init_network(2, 1, 2, 1, 10.0, 0);
  Subnetwork& sub = net.subnets[0];
  sub.weights[0] = numerics::identity(2);
  sub.biases[0] = {0.0, 0.0};
  sub.weights[1] = numerics::Matrix(1, 2);
  sub.weights[1](0, 0) = 1.0;  // picks relu(x_0)
  sub.biases[1] = {0.0};
  EXPECT_DOUBLE_EQ(forward(net, {1.0, -1.0})[0], 1.0);
  sub.weights[1](0, 0) = 0.0;
  sub.weights[1](0, 1) = 1.0;  // picks relu(x_1) = 0
  EXPECT_DOUBLE_EQ(forward(net, {1.0, -1.0})[0], 0.0);
}

TEST(Forward, ClampBoundsAdversarialInputs) {
  const MlpOperator net = init_network(3, 2, 16, 2, 0.5, 1);
  for (const Vec& m : random_inputs(500, 3, 2, 100.0)) {
    for (double v : forward(net, m)) {
      EXPECT_LE(v, 0.5);
      EXPECT_GE(v, -0.5);
    }
  }
}

TEST(Forward, MatchesStraightLineInterpreter) {
  const MlpOperator net = init_network(5, 3, 9, 3, 2.0, 3);
  for (const Vec& m : random_inputs(100, 5, 4)) {
    const Vec out = forward(net, m);
    for (std::size_t s = 0; s < 3; ++s) {
      EXPECT_NEAR(out[s],
                  straight_line_forward(net.subnets[s], m, net.output_clamp),
                  1e-12);
    }
  }
}

TEST(Forward, ComponentConsistencyIsExact) {
  const MlpOperator net = init_network(4, 3, 8, 2, 1.5, 9);
  for (const Vec& m : random_inputs(50, 4, 5)) {
    const Vec out = forward(net, m);
    for (std::size_t s = 0; s < 3; ++s)
      EXPECT_EQ(out[s], subnet_forward(net.subnets[s], m, net.output_clamp));
  }
}

TEST(LossAndGrad, PerfectFitGivesZeroLossAndGradient) {
  const MlpOperator net = init_network(3, 2, 8, 2, 5.0, 11);
  const auto inputs = random_inputs(10, 3, 6);
  std::vector<Vec> targets;
  for (const Vec& m : inputs) targets.push_back(forward(net, m));
  std::vector<std::size_t> batch(10);
  std::iota(batch.begin(), batch.end(), 0);
  const auto [loss, grad] = loss_and_grad(net, inputs, targets, batch);
  EXPECT_DOUBLE_EQ(loss, 0.0);
  for (const auto& sub : grad.subnets) {
    for (const auto& w : sub.weights)
      for (double g : w.data) EXPECT_DOUBLE_EQ(g, 0.0);
  }
}

TEST(LossAndGrad, SingleLinearNeuronAnalyticGradient) {
  // one input, one "hidden" unit held in the positive regime, so the net is
  // w_out * relu(w x + b) + b_out; pick x > 0, w > 0.
  MlpOperator net = init_network(1, 1, 1, 1, 100.0, 0);
  auto& sub = net.subnets[0];
  sub.weights[0](0, 0) = 0.7;
  sub.biases[0] = {0.2};
  sub.weights[1](0, 0) = 1.0;
  sub.biases[1] = {0.0};
  const std::vector<Vec> inputs{{1.3}};
  const std::vector<Vec> targets{{2.0}};
  const auto [loss, grad] = loss_and_grad(net, inputs, targets, {0});
  const double pre = 0.7 * 1.3 + 0.2;
  const double err = pre - 2.0;
  EXPECT_NEAR(loss, err * err, 1e-15);
  EXPECT_NEAR(grad.subnets[0].weights[0](0, 0), 2.0 * err * 1.3, 1e-13);
  EXPECT_NEAR(grad.subnets[0].biases[0][0], 2.0 * err, 1e-13);
  EXPECT_NEAR(grad.subnets[0].weights[1](0, 0), 2.0 * err * pre, 1e-13);
}

namespace {

// central finite differences over every parameter of the network
void check_gradients(MlpOperator& net, const std::vector<Vec>& inputs,
                     const std::vector<Vec>& targets, double h, double rel_tol) {
  std::vector<std::size_t> batch(inputs.size());
  std::iota(batch.begin(), batch.end(), 0);
  const auto [loss, grad] = loss_and_grad(net, inputs, targets, batch);
  auto loss_at = [&]() {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Vec out = forward(net, inputs[i]);
      for (std::size_t s = 0; s < out.size(); ++s) {
        const double e = out[s] - targets[i][s];
        acc += e * e;
      }
    }
    return acc / static_cast<double>(inputs.size());
  };
  for (std::size_t s = 0; s < net.subnets.size(); ++s) {
    for (std::size_t l = 0; l < net.subnets[s].weights.size(); ++l) {
      auto check_param = [&](double& p, double g) {
        const double saved = p;
        p = saved + h;
        const double up = loss_at();
        p = saved - h;
        const double down = loss_at();
        p = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({1e-4, std::abs(fd), std::abs(g)});
        EXPECT_LE(std::abs(fd - g) / denom, rel_tol)
            << "subnet " << s << " layer " << l;
      };
      auto& w = net.subnets[s].weights[l];
      for (std::size_t k = 0; k < w.data.size(); ++k)
        check_param(w.data[k], grad.subnets[s].weights[l].data[k]);
      auto& b = net.subnets[s].biases[l];
      for (std::size_t k = 0; k < b.size(); ++k)
        check_param(b[k], grad.subnets[s].biases[l][k]);
    }
  }
}

}  // namespace

TEST(LossAndGrad, FiniteDifferenceCheckOnRandomNet) {
  MlpOperator net = init_network(3, 2, 6, 2, 50.0, 21);
  const auto inputs = random_inputs(8, 3, 22);
  std::vector<Vec> targets = random_inputs(8, 2, 23);
  check_gradients(net, inputs, targets, 1e-5, 1e-5);
}

TEST(LossAndGrad, SaturatedClampHasZeroGradient) {
  MlpOperator net = init_network(1, 1, 1, 1, 0.1, 0);
  auto& sub = net.subnets[0];
  sub.weights[0](0, 0) = 1.0;
  sub.weights[1](0, 0) = 1.0;
  const std::vector<Vec> inputs{{5.0}};   // pre-clamp output 5 >> 0.1
  const std::vector<Vec> targets{{0.0}};
  const auto [loss, grad] = loss_and_grad(net, inputs, targets, {0});
  EXPECT_NEAR(loss, 0.1 * 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(grad.subnets[0].weights[0](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(grad.subnets[0].weights[1](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(grad.subnets[0].biases[1][0], 0.0);
}

TEST(Train, ZeroEpochsLeavesNetworkUnchanged) {
  MlpOperator net = init_network(2, 2, 4, 1, 1.0, 5);
  const MlpOperator before = net;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto inputs = random_inputs(16, 2, 6);
  const TrainHistory hist = train(net, inputs, inputs, cfg);
  for (std::size_t s = 0; s < net.subnets.size(); ++s)
    for (std::size_t l = 0; l < net.subnets[s].weights.size(); ++l)
      EXPECT_EQ(net.subnets[s].weights[l].data,
                before.subnets[s].weights[l].data);
  EXPECT_TRUE(hist.epoch_loss.empty());
  EXPECT_FALSE(hist.diverged);
}

TEST(Train, RealizableLinearTaskReachesSmallLoss) {
  // identity target a = m on the box; width 8, depth 2, 200 epochs
  MlpOperator net = init_network(2, 2, 8, 2, 3.0, 7);
  std::vector<Vec> inputs;
  rng::Stream s = rng::substream(8, 0);
  for (int i = 0; i < 256; ++i)
    inputs.push_back({s.next_uniform(-1.0, 1.0), s.next_uniform(-1.0, 1.0)});
  TrainConfig cfg;
  cfg.optimizer = Optimizer::adaptive;
  cfg.step_size = 0.01;
  cfg.batch_size = 32;
  cfg.epochs = 200;
  cfg.seed = 3;
  const TrainHistory hist = train(net, inputs, inputs, cfg);
  EXPECT_FALSE(hist.diverged);
  EXPECT_LT(hist.final_loss, 1e-3);
  // smoothed loss trend is nonincreasing over 10-epoch windows; the small
  // absolute slack absorbs optimizer jitter at the converged floor
  const auto& loss = hist.epoch_loss;
  for (std::size_t w = 10; w + 10 <= loss.size(); w += 10) {
    double prev = 0.0, cur = 0.0;
    for (std::size_t i = w - 10; i < w; ++i) prev += loss[i];
    for (std::size_t i = w; i < w + 10; ++i) cur += loss[i];
    EXPECT_LE(cur / 10.0, prev / 10.0 * 1.05 + 1e-4) << "window at " << w;
  }
}

TEST(Train, BitwiseDeterminism) {
  const auto inputs = random_inputs(64, 2, 10);
  const auto targets = random_inputs(64, 2, 11);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 12;
  MlpOperator n1 = init_network(2, 2, 8, 2, 2.0, 1);
  MlpOperator n2 = init_network(2, 2, 8, 2, 2.0, 1);
  train(n1, inputs, targets, cfg);
  train(n2, inputs, targets, cfg);
  for (std::size_t s = 0; s < n1.subnets.size(); ++s)
    for (std::size_t l = 0; l < n1.subnets[s].weights.size(); ++l)
      EXPECT_EQ(n1.subnets[s].weights[l].data, n2.subnets[s].weights[l].data);
}

TEST(Train, FrobeniusCapHoldsAfterTraining) {
  MlpOperator net = init_network(2, 2, 16, 2, 2.0, 2);
  const auto inputs = random_inputs(64, 2, 13);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.frobenius_cap = 2.0;
  train(net, inputs, inputs, cfg);
  const FrobeniusProfile prof = frobenius_profile(net);
  EXPECT_LE(prof.max_norm, 2.0 + 1e-12);
}

TEST(FrobeniusProfile, KnownNorms) {
  MlpOperator net = init_network(2, 1, 2, 1, 1.0, 0);
  auto& sub = net.subnets[0];
  sub.weights[0] = numerics::identity(2);
  sub.weights[1] = numerics::Matrix(1, 2);  // zeros
  const FrobeniusProfile prof = frobenius_profile(net);
  EXPECT_DOUBLE_EQ(prof.per_layer[0][0], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(prof.per_layer[0][1], 0.0);
  EXPECT_DOUBLE_EQ(prof.max_norm, std::sqrt(2.0));
}

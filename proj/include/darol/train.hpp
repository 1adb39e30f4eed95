#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "darol/mlp.hpp"
#include "darol/rng.hpp"

namespace darol::nn {

enum class Optimizer { sgd, adaptive };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adaptive;
  double step_size = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double frobenius_cap = 0.0;  // <= 0 disables the projection
};

struct TrainHistory {
  Vec epoch_loss;  // full-dataset loss after each epoch
  double final_loss = 0.0;
  FrobeniusProfile frobenius;
  bool diverged = false;
};

namespace detail {

// Rescale any weight matrix whose Frobenius norm exceeds the cap back onto
// the cap; projection onto the Frobenius ball.
inline void project_frobenius(MlpOperator& net, double cap) {
  for (Subnetwork& sub : net.subnets) {
    for (Matrix& w : sub.weights) {
      const double n = numerics::frobenius_norm(w);
      if (n > cap && n > 0.0) {
        const double f = cap / n;
        for (double& v : w.data) v *= f;
      }
    }
  }
}

struct AdamState {
  NetGradients m, v;
  std::size_t t = 0;
};

// Visits every parameter together with the matching entry of the gradient
// and, when present, the two optimizer-state buffers.
template <typename Fn>
inline void for_each_param(MlpOperator& net, const NetGradients& grad,
                           AdamState* adam, Fn&& fn) {
  for (std::size_t s = 0; s < net.subnets.size(); ++s) {
    for (std::size_t l = 0; l < net.subnets[s].weights.size(); ++l) {
      auto& wp = net.subnets[s].weights[l].data;
      const auto& wg = grad.subnets[s].weights[l].data;
      for (std::size_t k = 0; k < wp.size(); ++k) {
        if (adam)
          fn(wp[k], wg[k], &adam->m.subnets[s].weights[l].data[k],
             &adam->v.subnets[s].weights[l].data[k]);
        else
          fn(wp[k], wg[k], nullptr, nullptr);
      }
      auto& bp = net.subnets[s].biases[l];
      const auto& bg = grad.subnets[s].biases[l];
      for (std::size_t k = 0; k < bp.size(); ++k) {
        if (adam)
          fn(bp[k], bg[k], &adam->m.subnets[s].biases[l][k],
             &adam->v.subnets[s].biases[l][k]);
        else
          fn(bp[k], bg[k], nullptr, nullptr);
      }
    }
  }
}

}  // namespace detail

// Seeded mini-batch training. Single-threaded with a fixed visit order, so
// identical (net, data, config) inputs give bit-identical weights.
inline TrainHistory train(MlpOperator& net, const std::vector<Vec>& inputs,
                          const std::vector<Vec>& targets, const TrainConfig& cfg) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("train: dataset empty or ragged");
  if (inputs.front().size() != net.d_in || targets.front().size() != net.d_out)
    throw std::invalid_argument("train: dataset dimensions do not match network");
  if (cfg.batch_size < 1 || !(cfg.step_size > 0.0))
    throw std::invalid_argument("train: step size and batch size must be positive");

  TrainHistory history;
  detail::AdamState adam;
  if (cfg.optimizer == Optimizer::adaptive) {
    adam.m = zeros_like(net);
    adam.v = zeros_like(net);
  }
  if (cfg.frobenius_cap > 0.0) detail::project_frobenius(net, cfg.frobenius_cap);

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng::Stream shuffle_stream = rng::substream(cfg.seed, epoch);
    shuffle_stream.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + end);
      auto [loss, grad] = loss_and_grad(net, inputs, targets, batch);
      if (!std::isfinite(loss)) {
        history.diverged = true;
        history.final_loss = loss;
        history.frobenius = frobenius_profile(net);
        return history;
      }
      if (cfg.optimizer == Optimizer::sgd) {
        detail::for_each_param(net, grad, nullptr,
                               [&](double& p, double g, double*, double*) {
                                 p -= cfg.step_size * g;
                               });
      } else {
        ++adam.t;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
        detail::for_each_param(
            net, grad, &adam, [&](double& p, double g, double* m, double* v) {
              *m = b1 * *m + (1.0 - b1) * g;
              *v = b2 * *v + (1.0 - b2) * g * g;
              p -= cfg.step_size * (*m / bc1) / (std::sqrt(*v / bc2) + eps);
            });
      }
      if (cfg.frobenius_cap > 0.0)
        detail::project_frobenius(net, cfg.frobenius_cap);
    }
    const double epoch_loss = mean_squared_error(net, inputs, targets);
    history.epoch_loss.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss)) {
      history.diverged = true;
      break;
    }
  }
  history.final_loss = history.epoch_loss.empty()
                           ? mean_squared_error(net, inputs, targets)
                           : history.epoch_loss.back();
  history.frobenius = frobenius_profile(net);
  return history;
}

}  // namespace darol::nn

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "darol/matrix.hpp"
#include "darol/rng.hpp"

namespace darol::nn {

using numerics::Matrix;

// One scalar-output ReLU network: depth activated hidden layers of a common
// width followed by an affine output row. weights[l] maps layer l-1 to l;
// weights[depth] is the 1 x width output row.
struct Subnetwork {
  std::vector<Matrix> weights;
  std::vector<Vec> biases;
};

// Stack of d_out independent subnetworks sharing the input; the output of
// each is hard-clamped to [-output_clamp, +output_clamp], which keeps every
// member of the class inside the bounded-output family by construction.
struct MlpOperator {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::size_t width = 0;
  std::size_t depth = 0;  // number of activated hidden layers
  double output_clamp = 1.0;
  std::uint64_t seed = 0;
  std::vector<Subnetwork> subnets;
};

inline MlpOperator init_network(std::size_t d_in, std::size_t d_out,
                                std::size_t width, std::size_t depth,
                                double output_clamp, std::uint64_t seed) {
  if (d_in < 1 || d_out < 1 || width < 1 || depth < 1)
    throw std::invalid_argument("init_network: dimensions must be >= 1");
  if (!(output_clamp > 0.0))
    throw std::invalid_argument("init_network: output clamp must be > 0");

  MlpOperator net;
  net.d_in = d_in;
  net.d_out = d_out;
  net.width = width;
  net.depth = depth;
  net.output_clamp = output_clamp;
  net.seed = seed;
  net.subnets.resize(d_out);
  for (std::size_t s = 0; s < d_out; ++s) {
    Subnetwork& sub = net.subnets[s];
    sub.weights.reserve(depth + 1);
    sub.biases.reserve(depth + 1);
    for (std::size_t l = 0; l <= depth; ++l) {
      const std::size_t fan_in = (l == 0) ? d_in : width;
      const std::size_t fan_out = (l == depth) ? 1 : width;
      const double limit =
          std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Matrix w(fan_out, fan_in);
      rng::Stream stream = rng::substream(seed, s * 64 + l);
      for (double& v : w.data) v = stream.next_uniform(-limit, limit);
      sub.weights.push_back(std::move(w));
      sub.biases.emplace_back(fan_out, 0.0);
    }
  }
  return net;
}

// Scalar evaluation of one subnetwork.
inline double subnet_forward(const Subnetwork& sub, const Vec& m, double clamp) {
  Vec h = m;
  const std::size_t depth = sub.weights.size() - 1;
  for (std::size_t l = 0; l < depth; ++l) {
    Vec z = numerics::matvec(sub.weights[l], h);
    for (std::size_t i = 0; i < z.size(); ++i)
      z[i] = std::max(z[i] + sub.biases[l][i], 0.0);
    h = std::move(z);
  }
  double out = sub.biases[depth][0];
  for (std::size_t j = 0; j < h.size(); ++j) out += sub.weights[depth](0, j) * h[j];
  if (out > clamp) return clamp;
  if (out < -clamp) return -clamp;
  return out;
}

inline Vec forward(const MlpOperator& net, const Vec& m) {
  if (m.size() != net.d_in)
    throw std::invalid_argument("forward: input length != d_in");
  Vec out(net.d_out);
  for (std::size_t s = 0; s < net.d_out; ++s)
    out[s] = subnet_forward(net.subnets[s], m, net.output_clamp);
  return out;
}

// Same shapes as the parameters; used for gradients and optimizer state.
struct NetGradients {
  std::vector<Subnetwork> subnets;
};

inline NetGradients zeros_like(const MlpOperator& net) {
  NetGradients g;
  g.subnets.resize(net.subnets.size());
  for (std::size_t s = 0; s < net.subnets.size(); ++s) {
    for (const Matrix& w : net.subnets[s].weights)
      g.subnets[s].weights.emplace_back(w.rows, w.cols);
    for (const Vec& b : net.subnets[s].biases)
      g.subnets[s].biases.emplace_back(b.size(), 0.0);
  }
  return g;
}

// Mean over the batch of ||target - net(m)||^2 plus the full reverse-mode
// gradient. Subgradient conventions: ReLU'(0) = 0 and the output clamp
// passes gradient only strictly inside (-M, M).
inline std::pair<double, NetGradients> loss_and_grad(
    const MlpOperator& net, const std::vector<Vec>& inputs,
    const std::vector<Vec>& targets, const std::vector<std::size_t>& batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  NetGradients grad = zeros_like(net);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const std::size_t depth = net.depth;

  std::vector<Vec> acts(depth + 1);  // acts[0] = input, acts[l] = hidden layer l
  for (std::size_t idx : batch) {
    const Vec& m = inputs[idx];
    const Vec& target = targets[idx];
    for (std::size_t s = 0; s < net.d_out; ++s) {
      const Subnetwork& sub = net.subnets[s];
      Subnetwork& g = grad.subnets[s];

      acts[0] = m;
      for (std::size_t l = 0; l < depth; ++l) {
        Vec z = numerics::matvec(sub.weights[l], acts[l]);
        for (std::size_t i = 0; i < z.size(); ++i)
          z[i] = std::max(z[i] + sub.biases[l][i], 0.0);
        acts[l + 1] = std::move(z);
      }
      double pre = sub.biases[depth][0];
      for (std::size_t j = 0; j < acts[depth].size(); ++j)
        pre += sub.weights[depth](0, j) * acts[depth][j];
      if (!std::isfinite(pre))
        throw NumericalError("loss_and_grad: non-finite forward pass");
      const double M = net.output_clamp;
      const double out = pre > M ? M : (pre < -M ? -M : pre);

      const double err = out - target[s];
      loss += err * err * inv_n;

      double delta = 2.0 * err * inv_n;
      if (!(pre > -M && pre < M)) delta = 0.0;  // saturated clamp

      // output row
      for (std::size_t j = 0; j < acts[depth].size(); ++j)
        g.weights[depth](0, j) += delta * acts[depth][j];
      g.biases[depth][0] += delta;

      Vec upstream(acts[depth].size());
      for (std::size_t j = 0; j < upstream.size(); ++j)
        upstream[j] = delta * sub.weights[depth](0, j);

      for (std::size_t l = depth; l-- > 0;) {
        // upstream refers to layer l+1's input = activation of layer l
        Vec local(acts[l + 1].size());
        for (std::size_t i = 0; i < local.size(); ++i)
          local[i] = acts[l + 1][i] > 0.0 ? upstream[i] : 0.0;
        for (std::size_t i = 0; i < local.size(); ++i) {
          g.biases[l][i] += local[i];
          for (std::size_t j = 0; j < acts[l].size(); ++j)
            g.weights[l](i, j) += local[i] * acts[l][j];
        }
        if (l > 0) {
          Vec next(acts[l].size(), 0.0);
          for (std::size_t i = 0; i < local.size(); ++i)
            for (std::size_t j = 0; j < acts[l].size(); ++j)
              next[j] += local[i] * sub.weights[l](i, j);
          upstream = std::move(next);
        }
      }
    }
  }
  return {loss, std::move(grad)};
}

inline double mean_squared_error(const MlpOperator& net,
                                 const std::vector<Vec>& inputs,
                                 const std::vector<Vec>& targets) {
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vec out = forward(net, inputs[i]);
    for (std::size_t s = 0; s < out.size(); ++s) {
      const double e = out[s] - targets[i][s];
      loss += e * e;
    }
  }
  return loss / static_cast<double>(inputs.size());
}

struct FrobeniusProfile {
  std::vector<Vec> per_layer;  // per subnetwork, per weight matrix
  double max_norm = 0.0;       // M_F over all layers and subnetworks
};

inline FrobeniusProfile frobenius_profile(const MlpOperator& net) {
  FrobeniusProfile p;
  p.per_layer.resize(net.subnets.size());
  for (std::size_t s = 0; s < net.subnets.size(); ++s) {
    for (const Matrix& w : net.subnets[s].weights) {
      const double n = numerics::frobenius_norm(w);
      p.per_layer[s].push_back(n);
      p.max_norm = std::max(p.max_norm, n);
    }
  }
  return p;
}

}  // namespace darol::nn

#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "darol/common.hpp"
#include "darol/rng.hpp"

namespace darol::forward {

enum class PriorKind { sparse_spike, uniform_box, truncated_gaussian };

// Every prior has compact support; radius() is the l2 radius of that set.
// box_center shifts the box priors, e.g. onto the positive coefficients a
// diffusion solve needs.
struct PriorSpec {
  PriorKind kind = PriorKind::uniform_box;
  std::size_t dimension = 1;
  double box_radius = 1.0;   // uniform_box / truncation box half-width
  double box_center = 0.0;   // common center of all coordinates
  double gauss_std = 1.0;    // truncated_gaussian
  std::size_t sparsity = 1;  // sparse_spike: number of nonzeros
  double amp_min = 0.5;      // sparse_spike amplitude range
  double amp_max = 1.5;

  double radius() const {
    switch (kind) {
      case PriorKind::sparse_spike:
        return std::sqrt(static_cast<double>(sparsity)) *
               std::max(std::abs(amp_min), std::abs(amp_max));
      case PriorKind::uniform_box:
      case PriorKind::truncated_gaussian:
        return (box_radius + std::abs(box_center)) *
               std::sqrt(static_cast<double>(dimension));
    }
    return 0.0;
  }
};

inline void validate(const PriorSpec& spec) {
  if (spec.dimension < 1) throw std::invalid_argument("prior: dimension < 1");
  if (spec.kind == PriorKind::sparse_spike) {
    if (spec.sparsity > spec.dimension)
      throw std::invalid_argument("prior: sparsity k exceeds dimension");
    if (spec.amp_max < spec.amp_min)
      throw std::invalid_argument("prior: amp_max < amp_min");
  } else {
    if (!(spec.box_radius > 0.0))
      throw std::invalid_argument("prior: box_radius must be > 0");
    if (spec.kind == PriorKind::truncated_gaussian && !(spec.gauss_std > 0.0))
      throw std::invalid_argument("prior: gauss_std must be > 0");
  }
}

inline Vec sample_one(const PriorSpec& spec, rng::Stream& stream) {
  Vec a(spec.dimension, 0.0);
  switch (spec.kind) {
    case PriorKind::uniform_box:
      for (double& x : a)
        x = spec.box_center +
            stream.next_uniform(-spec.box_radius, spec.box_radius);
      break;
    case PriorKind::truncated_gaussian:
      for (double& x : a) {
        // rejection against the box; acceptance is high for std ~ radius
        double g;
        do {
          g = spec.gauss_std * stream.next_gaussian();
        } while (std::abs(g) > spec.box_radius);
        x = spec.box_center + g;
      }
      break;
    case PriorKind::sparse_spike: {
      // partial Fisher-Yates draws k distinct positions
      std::vector<std::size_t> idx(spec.dimension);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < spec.sparsity; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(stream.next_below(spec.dimension - i));
        std::swap(idx[i], idx[j]);
        a[idx[i]] = stream.next_uniform(spec.amp_min, spec.amp_max);
      }
      break;
    }
  }
  return a;
}

// n i.i.d. draws; sample i reads only substream (seed, i), so generation
// order (serial or parallel) cannot change the result.
inline std::vector<Vec> sample_prior(const PriorSpec& spec, std::size_t n,
                                     std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("sample_prior: n < 1");
  std::vector<Vec> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream s = rng::substream(seed, i);
    out[i] = sample_one(spec, s);
  }
  return out;
}

inline bool in_support(const PriorSpec& spec, const Vec& a) {
  if (a.size() != spec.dimension) return false;
  switch (spec.kind) {
    case PriorKind::uniform_box:
    case PriorKind::truncated_gaussian:
      for (double x : a)
        if (std::abs(x - spec.box_center) > spec.box_radius) return false;
      return true;
    case PriorKind::sparse_spike: {
      std::size_t nnz = 0;
      for (double x : a) {
        if (x != 0.0) {
          ++nnz;
          if (x < spec.amp_min || x > spec.amp_max) return false;
        }
      }
      return nnz <= spec.sparsity;
    }
  }
  return false;
}

// log density w.r.t. Lebesgue, up to an additive constant; used by the
// Metropolis ratio. Only the continuous priors are usable there.
inline double log_density_unnormalized(const PriorSpec& spec, const Vec& a) {
  switch (spec.kind) {
    case PriorKind::uniform_box:
      return 0.0;
    case PriorKind::truncated_gaussian: {
      double s = 0.0;
      for (double x : a) s += (x - spec.box_center) * (x - spec.box_center);
      return -0.5 * s / (spec.gauss_std * spec.gauss_std);
    }
    case PriorKind::sparse_spike:
      throw std::invalid_argument(
          "sparse_spike prior has no Lebesgue density; not usable for MCMC");
  }
  return 0.0;
}

inline Vec prior_mean(const PriorSpec& spec) {
  if (spec.kind == PriorKind::sparse_spike)
    throw std::invalid_argument("prior_mean: not defined for sparse_spike here");
  return Vec(spec.dimension, spec.box_center);  // box priors are center-symmetric
}

}  // namespace darol::forward

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "darol/matrix.hpp"
#include "darol/rng.hpp"

namespace darol::forward {

enum class MapKind { gaussian_sensing, convolution_toeplitz, diagonal, custom };

struct LinearForwardMap {
  numerics::Matrix a;  // d_m x d_a
  MapKind kind = MapKind::custom;
  std::uint64_t seed = 0;

  std::size_t d_m() const { return a.rows; }
  std::size_t d_a() const { return a.cols; }
};

struct MapParams {
  Vec diag;    // diagonal kind
  Vec kernel;  // convolution_toeplitz kind
};

inline LinearForwardMap make_linear_map(MapKind kind, std::size_t d_m,
                                        std::size_t d_a, const MapParams& params,
                                        std::uint64_t seed) {
  if (d_m < 1 || d_a < 1)
    throw std::invalid_argument("make_linear_map: dimensions must be >= 1");
  LinearForwardMap map;
  map.kind = kind;
  map.seed = seed;
  map.a = numerics::Matrix(d_m, d_a);
  switch (kind) {
    case MapKind::gaussian_sensing: {
      // i.i.d. N(0, 1/d_m) entries give unit expected column norms.
      const double s = 1.0 / std::sqrt(static_cast<double>(d_m));
      for (std::size_t i = 0; i < d_m; ++i) {
        rng::Stream row = rng::substream(seed, i);
        for (std::size_t j = 0; j < d_a; ++j)
          map.a(i, j) = s * row.next_gaussian();
      }
      break;
    }
    case MapKind::convolution_toeplitz: {
      if (params.kernel.empty())
        throw std::invalid_argument("make_linear_map: toeplitz kernel missing");
      if (params.kernel.size() > d_a)
        throw std::invalid_argument("make_linear_map: kernel longer than signal");
      for (std::size_t i = 0; i < d_m; ++i) {
        for (std::size_t j = 0; j < d_a; ++j) {
          if (j >= i && j - i < params.kernel.size())
            map.a(i, j) = params.kernel[j - i];
        }
      }
      break;
    }
    case MapKind::diagonal: {
      if (d_m != d_a)
        throw std::invalid_argument("make_linear_map: diagonal requires d_m == d_a");
      if (params.diag.size() != d_a)
        throw std::invalid_argument("make_linear_map: diag entries missing");
      for (std::size_t i = 0; i < d_a; ++i) map.a(i, i) = params.diag[i];
      break;
    }
    case MapKind::custom:
      throw std::invalid_argument(
          "make_linear_map: custom maps are constructed directly from a matrix");
  }
  return map;
}

inline Vec apply_forward(const LinearForwardMap& map, const Vec& a) {
  if (a.size() != map.d_a())
    throw std::invalid_argument("apply_forward: parameter length " +
                                std::to_string(a.size()) + " != d_a " +
                                std::to_string(map.d_a()));
  return numerics::matvec(map.a, a);
}

enum class NoiseKind { none, gaussian };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double std = 0.0;
};

inline Vec add_noise(const Vec& m, const NoiseSpec& spec, std::uint64_t seed) {
  if (!all_finite(m)) throw std::invalid_argument("add_noise: non-finite input");
  if (!std::isfinite(spec.std) || spec.std < 0.0)
    throw std::invalid_argument("add_noise: noise std must be finite and >= 0");
  if (spec.kind == NoiseKind::none || spec.std == 0.0) return m;
  Vec out = m;
  rng::Stream s = rng::substream(seed, 0);
  for (double& x : out) x += spec.std * s.next_gaussian();
  return out;
}

}  // namespace darol::forward

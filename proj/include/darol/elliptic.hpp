#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "darol/common.hpp"

namespace darol::forward {

// 1-D diffusion model -(a u')' = g on (0,1), u(0) = u(1) = 0, with a
// piecewise-constant coefficient on coeff_cells equal cells. Measurements
// are u at the listed interior grid nodes.
struct EllipticModel {
  std::size_t grid_size = 63;  // interior node count N; h = 1/(N+1)
  Vec source;                  // g at the interior nodes (size N)
  std::vector<std::size_t> sensor_indices;  // 0-based interior node indices
  std::size_t coeff_cells = 1;              // d_a
  double coeff_floor = 1e-3;                // positivity floor a_min
};

inline void validate(const EllipticModel& model) {
  if (model.grid_size < 1) throw std::invalid_argument("elliptic: grid_size < 1");
  if (model.source.size() != model.grid_size)
    throw std::invalid_argument("elliptic: source length != grid_size");
  if (model.coeff_cells < 1) throw std::invalid_argument("elliptic: coeff_cells < 1");
  if (model.grid_size < model.coeff_cells)
    throw std::invalid_argument("elliptic: grid_size must be >= coeff_cells");
  if (!(model.coeff_floor > 0.0))
    throw std::invalid_argument("elliptic: coeff_floor must be > 0");
  for (std::size_t s : model.sensor_indices) {
    if (s >= model.grid_size)
      throw std::invalid_argument("elliptic: sensor index out of grid");
  }
}

// Thomas algorithm. lower[0] and upper[n-1] are unused.
inline Vec solve_tridiagonal(const Vec& lower, const Vec& diag, const Vec& upper,
                             const Vec& rhs) {
  const std::size_t n = diag.size();
  Vec c(n, 0.0), d(n, 0.0), x(n, 0.0);
  if (std::abs(diag[0]) < 1e-300)
    throw NumericalError("tridiagonal solve: singular pivot at row 0");
  c[0] = upper[0] / diag[0];
  d[0] = rhs[0] / diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i] * c[i - 1];
    if (std::abs(m) < 1e-300)
      throw NumericalError("tridiagonal solve: singular pivot at row " +
                           std::to_string(i));
    c[i] = upper[i] / m;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

namespace detail {

inline double cell_value(const Vec& cells, double x) {
  const std::size_t n = cells.size();
  auto idx = static_cast<std::size_t>(x * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  return cells[idx];
}

}  // namespace detail

// Full interior solution; conservative second-order scheme with
// harmonic-mean interface coefficients.
inline Vec solve_elliptic_full(const EllipticModel& model, const Vec& cells) {
  validate(model);
  if (cells.size() != model.coeff_cells)
    throw std::invalid_argument("solve_elliptic: coefficient count != coeff_cells");
  for (double a : cells) {
    if (!(a >= model.coeff_floor))
      throw std::invalid_argument("solve_elliptic: coefficient below floor " +
                                  format_double(model.coeff_floor));
  }

  const std::size_t n = model.grid_size;
  const double h = 1.0 / static_cast<double>(n + 1);
  // interface coefficient a_{j+1/2} between nodes j and j+1 (0 = left boundary)
  Vec iface(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double left = detail::cell_value(cells, h * static_cast<double>(j));
    const double right = detail::cell_value(cells, h * static_cast<double>(j + 1));
    iface[j] = 2.0 * left * right / (left + right);
  }

  Vec lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  const double inv_h2 = 1.0 / (h * h);
  for (std::size_t j = 0; j < n; ++j) {
    diag[j] = (iface[j] + iface[j + 1]) * inv_h2;
    if (j > 0) lower[j] = -iface[j] * inv_h2;
    if (j + 1 < n) upper[j] = -iface[j + 1] * inv_h2;
    rhs[j] = model.source[j];
  }
  return solve_tridiagonal(lower, diag, upper, rhs);
}

inline Vec solve_elliptic(const EllipticModel& model, const Vec& cells) {
  const Vec u = solve_elliptic_full(model, cells);
  Vec out(model.sensor_indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[model.sensor_indices[i]];
  return out;
}

}  // namespace darol::forward

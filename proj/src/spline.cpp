#include "kanwm/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kanwm/error.hpp"

namespace kanwm {

double SplineGrid::clamp(double x) const noexcept { return std::clamp(x, t_min, t_max); }

SplineGrid build_grid(int degree, int intervals, double t_min, double t_max) {
  require(degree >= 0 && degree <= kMaxSplineDegree, ErrorKind::invalid_argument,
          "build_grid: degree must be in [0, " + std::to_string(kMaxSplineDegree) + "]");
  require(intervals >= 1, ErrorKind::invalid_argument, "build_grid: intervals must be >= 1");
  require(std::isfinite(t_min) && std::isfinite(t_max) && t_min < t_max,
          ErrorKind::invalid_argument, "build_grid: need finite t_min < t_max");

  SplineGrid g;
  g.degree = degree;
  g.intervals = intervals;
  g.t_min = t_min;
  g.t_max = t_max;
  const double h = (t_max - t_min) / intervals;
  const int n = intervals + 2 * degree + 1;
  g.knots.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    g.knots[static_cast<std::size_t>(i)] = t_min + (i - degree) * h;
  }
  // Pin the domain ends so clamped inputs land exactly on knots.
  g.knots[static_cast<std::size_t>(degree)] = t_min;
  g.knots[static_cast<std::size_t>(degree + intervals)] = t_max;
  return g;
}

namespace {

std::size_t find_span(const SplineGrid& g, double x) {
  const std::size_t lo = static_cast<std::size_t>(g.degree);
  const std::size_t hi = static_cast<std::size_t>(g.degree + g.intervals - 1);
  if (x >= g.t_max) return hi;
  auto s = static_cast<std::ptrdiff_t>(lo) +
           static_cast<std::ptrdiff_t>(std::floor((x - g.t_min) / g.spacing()));
  std::size_t span = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(s, static_cast<std::ptrdiff_t>(lo), static_cast<std::ptrdiff_t>(hi)));
  // Rounding in the division can land one interval off; settle against
  // the stored knots.
  while (span > lo && x < g.knots[span]) --span;
  while (span < hi && x >= g.knots[span + 1]) ++span;
  return span;
}

}  // namespace

BasisSpan eval_basis_span(const SplineGrid& grid, double x, bool with_derivatives) {
  const double u = grid.clamp(x);
  const std::size_t p = static_cast<std::size_t>(grid.degree);
  const std::size_t s = find_span(grid, u);
  const auto& t = grid.knots;

  BasisSpan out;
  out.first = s - p;

  // de Boor triangle; `lower` keeps the degree p-1 row for derivatives.
  std::array<double, kMaxSplineDegree + 1> n{};
  std::array<double, kMaxSplineDegree + 1> lower{};
  std::array<double, kMaxSplineDegree + 2> left{};
  std::array<double, kMaxSplineDegree + 2> right{};
  n[0] = 1.0;
  for (std::size_t j = 1; j <= p; ++j) {
    if (j == p) lower = n;
    left[j] = u - t[s + 1 - j];
    right[j] = t[s + j] - u;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double tmp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    n[j] = saved;
  }
  out.values = n;

  if (with_derivatives && p > 0) {
    // lower[r] is B_{s-p+1+r, p-1} for r in [0, p).
    const double dp = static_cast<double>(p);
    for (std::size_t r = 0; r <= p; ++r) {
      const std::size_t i = s - p + r;
      const double a = r >= 1 ? lower[r - 1] / (t[i + p] - t[i]) : 0.0;
      const double b = r < p ? lower[r] / (t[i + p + 1] - t[i + 1]) : 0.0;
      out.derivatives[r] = dp * (a - b);
    }
  }
  return out;
}

std::vector<double> basis_values(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count(), 0.0);
  const BasisSpan sp = eval_basis_span(grid, x, false);
  for (std::size_t r = 0; r < grid.order(); ++r) out[sp.first + r] = sp.values[r];
  return out;
}

std::vector<double> basis_derivatives(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count(), 0.0);
  const BasisSpan sp = eval_basis_span(grid, x, true);
  for (std::size_t r = 0; r < grid.order(); ++r) out[sp.first + r] = sp.derivatives[r];
  return out;
}

}  // namespace kanwm

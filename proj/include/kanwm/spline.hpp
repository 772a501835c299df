#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace kanwm {

inline constexpr int kMaxSplineDegree = 7;

// Uniform knot vector over [t_min, t_max] with `degree` extra knots past
// each end at the interior spacing.
struct SplineGrid {
  int degree = 3;
  int intervals = 5;
  double t_min = -1.0;
  double t_max = 1.0;
  std::vector<double> knots;  // intervals + 2*degree + 1 entries

  std::size_t basis_count() const noexcept {
    return static_cast<std::size_t>(intervals + degree);
  }
  std::size_t order() const noexcept { return static_cast<std::size_t>(degree + 1); }
  double spacing() const noexcept { return (t_max - t_min) / intervals; }
  double clamp(double x) const noexcept;

  friend bool operator==(const SplineGrid&, const SplineGrid&) = default;
};

SplineGrid build_grid(int degree, int intervals, double t_min, double t_max);

// The (degree + 1) basis functions that can be nonzero at a point, starting
// at index `first`.
struct BasisSpan {
  std::size_t first = 0;
  std::array<double, kMaxSplineDegree + 1> values{};
  std::array<double, kMaxSplineDegree + 1> derivatives{};
};

// Evaluates the local basis at clamp(x). The containing knot interval is
// half-open [t_s, t_s+1) except the last one, which also owns t_max.
// Derivatives are d/dx of each basis function at the clamped point; at an
// interior knot this is the right-hand limit.
BasisSpan eval_basis_span(const SplineGrid& grid, double x, bool with_derivatives);

std::vector<double> basis_values(const SplineGrid& grid, double x);
std::vector<double> basis_derivatives(const SplineGrid& grid, double x);

}  // namespace kanwm

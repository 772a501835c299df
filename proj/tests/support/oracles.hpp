#pragma once

// Brute-force reference implementations. They follow the textbook
// definitions directly and share no evaluation code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "kanwm/kan.hpp"
#include "kanwm/mlp.hpp"
#include "kanwm/numeric.hpp"
#include "kanwm/rng.hpp"

namespace oracle {

// Cox-de Boor recursion. Degree-0 pieces are half-open, except that the
// last non-empty interval ending at `right_end` also owns it.
inline double bspline(const std::vector<double>& t, std::size_t i, int k, double x,
                      double right_end) {
  if (k == 0) {
    if (x == right_end) return t[i + 1] == right_end && t[i] < t[i + 1] ? 1.0 : 0.0;
    return t[i] <= x && x < t[i + 1] ? 1.0 : 0.0;
  }
  double a = 0.0;
  double b = 0.0;
  double d1 = t[i + k] - t[i];
  double d2 = t[i + k + 1] - t[i + 1];
  if (d1 > 0) a = (x - t[i]) / d1 * bspline(t, i, k - 1, x, right_end);
  if (d2 > 0) b = (t[i + k + 1] - x) / d2 * bspline(t, i + 1, k - 1, x, right_end);
  return a + b;
}

// Uniform knots written out one by one.
inline std::vector<double> knots(int degree, int intervals, double lo, double hi) {
  std::vector<double> t;
  double h = (hi - lo) / intervals;
  for (int i = -degree; i <= intervals + degree; ++i)
    t.push_back(i == 0 ? lo : i == intervals ? hi : lo + i * h);
  return t;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double dct_coeff(const std::vector<double>& x, std::size_t k) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] * std::cos(std::numbers::pi / n * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
  return (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n)) * s;
}

inline std::vector<double> dct(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = dct_coeff(x, k);
  return out;
}

inline std::vector<double> idct(const std::vector<double>& X) {
  const double n = static_cast<double>(X.size());
  std::vector<double> out(X.size(), 0.0);
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t k = 0; k < X.size(); ++k)
      out[i] += (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n)) * X[k] *
                std::cos(std::numbers::pi / n * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
  return out;
}

inline double edge(const kanwm::KanLayer& layer, std::size_t j, std::size_t i, double x) {
  const std::size_t e = j * layer.in_dim + i;
  if (layer.mask[e] == 0) return 0.0;
  const auto& g = layer.grid;
  auto t = knots(g.degree, g.intervals, g.t_min, g.t_max);
  double xc = std::min(std::max(x, g.t_min), g.t_max);
  const std::size_t nb = static_cast<std::size_t>(g.intervals + g.degree);
  double spline = 0.0;
  for (std::size_t m = 0; m < nb; ++m)
    spline += layer.coeffs[e * nb + m] * bspline(t, m, g.degree, xc, g.t_max);
  return layer.w_base[e] * silu(x) + layer.w_spline[e] * spline;
}

inline kanwm::Mat layer_forward(const kanwm::KanLayer& layer, const kanwm::Mat& x) {
  kanwm::Mat out(x.rows(), layer.out_dim);
  for (std::size_t b = 0; b < x.rows(); ++b)
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < layer.in_dim; ++i) s += oracle::edge(layer, j, i, x(b, i));
      out(b, j) = s;
    }
  return out;
}

inline kanwm::Mat model_forward(const kanwm::KanModel& model, const kanwm::Mat& x) {
  kanwm::Mat h = x;
  for (const auto& layer : model.layers) h = oracle::layer_forward(layer, h);
  return h;
}

inline kanwm::Mat mlp_forward(const kanwm::MlpModel& model, const kanwm::Mat& x) {
  kanwm::Mat h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    kanwm::Mat next(h.rows(), layer.weight.rows());
    for (std::size_t b = 0; b < h.rows(); ++b)
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.weight.cols(); ++i) s += layer.weight(o, i) * h(b, i);
        next(b, o) = l + 1 < model.layers.size() ? std::max(s, 0.0) : s;
      }
    h = std::move(next);
  }
  return h;
}

inline double max_abs_diff(const kanwm::Mat& a, const kanwm::Mat& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Relative error used by the gradient checks.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-7);
}

inline double central_difference(double& param, const std::function<double()>& loss,
                                 double h = 1e-5) {
  const double keep = param;
  param = keep + h;
  const double up = loss();
  param = keep - h;
  const double down = loss();
  param = keep;
  return (up - down) / (2 * h);
}

inline kanwm::Mat random_mat(std::size_t rows, std::size_t cols, kanwm::Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  kanwm::Mat m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// Small KAN with randomized weights and some masked edges.
inline kanwm::KanModel random_kan(const std::vector<std::size_t>& widths, kanwm::Rng& rng,
                                  int degree = 3, int intervals = 5, bool with_masks = false) {
  kanwm::KanInit init;
  init.degree = degree;
  init.intervals = intervals;
  init.coeff_stddev = 0.5;
  kanwm::KanModel model = kanwm::make_kan(widths, init, rng);
  for (auto& layer : model.layers) {
    for (double& w : layer.w_spline) w = rng.uniform(-1.0, 1.0);
    if (with_masks)
      for (auto& m : layer.mask) m = rng.uniform() < 0.2 ? 0 : 1;
  }
  if (with_masks) model.zero_masked();
  return model;
}

}  // namespace oracle

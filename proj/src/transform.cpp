#include "kanwm/transform.hpp"

#include <cmath>
#include <numbers>

#include "kanwm/error.hpp"

namespace kanwm {

namespace {

double scale(std::size_t k, std::size_t n) {
  return std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
}

double basis(std::size_t n, std::size_t k, std::size_t len) {
  return std::cos(std::numbers::pi / static_cast<double>(len) *
                  (static_cast<double>(n) + 0.5) * static_cast<double>(k));
}

}  // namespace

std::vector<double> dct(std::span<const double> x) {
  require(!x.empty(), ErrorKind::invalid_argument, "dct: empty input");
  const std::size_t len = x.size();
  std::vector<double> out(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    double acc = 0.0;
    for (std::size_t n = 0; n < len; ++n) acc += x[n] * basis(n, k, len);
    out[k] = scale(k, len) * acc;
  }
  return out;
}

std::vector<double> idct(std::span<const double> spectrum) {
  require(!spectrum.empty(), ErrorKind::invalid_argument, "idct: empty input");
  const std::size_t len = spectrum.size();
  std::vector<double> out(len, 0.0);
  for (std::size_t n = 0; n < len; ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k) acc += scale(k, len) * spectrum[k] * basis(n, k, len);
    out[n] = acc;
  }
  return out;
}

std::vector<double> perturb(std::span<const double> y, std::span<const double> p) {
  require(y.size() == p.size(), ErrorKind::dimension, "perturb: signal length mismatch");
  std::vector<double> spec = dct(y);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] += p[k];
  return idct(spec);
}

}  // namespace kanwm

#pragma once

#include <span>
#include <vector>

namespace kanwm {

// Orthonormal DCT-II: X_k = s_k sum_n x_n cos(pi/N (n + 1/2) k),
// s_0 = sqrt(1/N), s_k = sqrt(2/N). Evaluated directly in O(N^2).
std::vector<double> dct(std::span<const double> x);

// Orthonormal DCT-III, the exact inverse of dct().
std::vector<double> idct(std::span<const double> spectrum);

// idct(dct(y) + p)
std::vector<double> perturb(std::span<const double> y, std::span<const double> p);

}  // namespace kanwm

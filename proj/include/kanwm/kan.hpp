#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kanwm/numeric.hpp"
#include "kanwm/rng.hpp"
#include "kanwm/spline.hpp"

namespace kanwm {

// One KAN layer: every (out j, in i) edge carries
//   phi_{j,i}(x) = mask * (w_base * silu(x) + w_spline * sum_m coeff_m B_m(x))
// and node j sums its incoming edges. All edges share one grid.
struct KanLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  SplineGrid grid;
  std::vector<double> coeffs;        // [out][in][basis]
  std::vector<double> w_base;        // [out][in]
  std::vector<double> w_spline;      // [out][in]
  std::vector<std::uint8_t> mask;    // [out][in], 1 = live

  KanLayer() = default;
  KanLayer(std::size_t in, std::size_t out, SplineGrid g);

  std::size_t edge(std::size_t j, std::size_t i) const noexcept { return j * in_dim + i; }
  std::size_t edge_count() const noexcept { return in_dim * out_dim; }
  std::size_t basis_count() const noexcept { return grid.basis_count(); }
  std::span<double> edge_coeffs(std::size_t j, std::size_t i) {
    return {coeffs.data() + edge(j, i) * basis_count(), basis_count()};
  }
  std::span<const double> edge_coeffs(std::size_t j, std::size_t i) const {
    return {coeffs.data() + edge(j, i) * basis_count(), basis_count()};
  }

  friend bool operator==(const KanLayer&, const KanLayer&) = default;
};

struct KanModel {
  std::vector<KanLayer> layers;

  std::vector<std::size_t> widths() const;
  std::size_t edge_count() const;
  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t output_dim() const { return layers.back().out_dim; }

  // Zeroes the stored parameters of every masked edge.
  void zero_masked();
  // Marks every edge live again; parameters are left as they are.
  void lift_masks();

  friend bool operator==(const KanModel&, const KanModel&) = default;
};

struct KanInit {
  int degree = 3;
  int intervals = 5;
  double t_min = -1.0;
  double t_max = 1.0;
  double coeff_stddev = 0.1;
};

// w_base ~ U(-1, 1)/sqrt(in), w_spline = 1/sqrt(in), coeffs ~ N(0, stddev^2).
KanModel make_kan(std::span<const std::size_t> widths, const KanInit& init, Rng& rng);

// Post-sum outputs of layer 0, one row per sample.
struct ActivationBatch {
  Mat values;
};

double edge_activation(const KanLayer& layer, std::size_t j, std::size_t i, double x);

// Per-input quantities of one layer forward, reused by backward.
struct KanLayerCache {
  Mat input;
  std::vector<double> silu_values;      // [batch][in]
  std::vector<double> silu_slopes;      // [batch][in]
  std::vector<std::uint8_t> in_domain;  // [batch][in], spline slope is 0 when clamped
  std::vector<std::size_t> span_first;  // [batch][in]
  std::vector<double> basis;            // [batch][in][order]
  std::vector<double> basis_slopes;     // [batch][in][order]
};

struct KanForwardCache {
  std::vector<KanLayerCache> layers;
};

Mat layer_forward(const KanLayer& layer, const Mat& x, KanLayerCache* cache = nullptr);

struct KanForward {
  Mat output;
  ActivationBatch layer0;
  KanForwardCache cache;
};

KanForward model_forward(const KanModel& model, const Mat& x, bool keep_cache = false);
Mat model_predict(const KanModel& model, const Mat& x);

struct KanLayerGrads {
  std::vector<double> coeffs;
  std::vector<double> w_base;
  std::vector<double> w_spline;
};

struct KanGrads {
  std::vector<KanLayerGrads> layers;
};

// Gradients w.r.t. the layer's parameters for upstream dL/dy; returns
// dL/dx when `need_input_grad`.
Mat layer_backward(const KanLayer& layer, const KanLayerCache& cache, const Mat& upstream,
                   KanLayerGrads& grads, bool need_input_grad);

KanGrads model_backward(const KanModel& model, const Mat& upstream, const KanForwardCache& cache);

// Optimizer slots for layers [first, last).
std::vector<ParamSlot> kan_param_slots(KanModel& model, const KanGrads& grads,
                                       std::size_t first_layer = 0,
                                       std::size_t last_layer = static_cast<std::size_t>(-1));

// importance[j*in + i] = mean_b |phi_{j,i}(x_b)| with x the layer's input.
std::vector<double> edge_importance(const KanModel& model, std::size_t layer_index,
                                    const Mat& calibration);

// Masks and zeroes the floor(ratio * E) least important edges across all
// layers; ties go to the lexicographically first (layer, j, i).
KanModel prune_kan(const KanModel& model, double ratio, const Mat& calibration);


}  // namespace kanwm

#include "kanwm/kan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "kanwm/error.hpp"

namespace kanwm {

KanLayer::KanLayer(std::size_t in, std::size_t out, SplineGrid g)
    : in_dim(in),
      out_dim(out),
      grid(std::move(g)),
      coeffs(in * out * grid.basis_count(), 0.0),
      w_base(in * out, 0.0),
      w_spline(in * out, 0.0),
      mask(in * out, 1) {
  require(in > 0 && out > 0, ErrorKind::invalid_argument, "KanLayer: dims must be positive");
}

std::vector<std::size_t> KanModel::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_dim);
  for (const auto& l : layers) w.push_back(l.out_dim);
  return w;
}

std::size_t KanModel::edge_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.edge_count();
  return n;
}

void KanModel::zero_masked() {
  for (auto& l : layers) {
    for (std::size_t e = 0; e < l.edge_count(); ++e) {
      if (l.mask[e]) continue;
      l.w_base[e] = 0.0;
      l.w_spline[e] = 0.0;
      std::fill_n(l.coeffs.begin() + static_cast<std::ptrdiff_t>(e * l.basis_count()),
                  l.basis_count(), 0.0);
    }
  }
}

void KanModel::lift_masks() {
  for (auto& l : layers) std::fill(l.mask.begin(), l.mask.end(), std::uint8_t{1});
}

KanModel make_kan(std::span<const std::size_t> widths, const KanInit& init, Rng& rng) {
  require(widths.size() >= 2, ErrorKind::invalid_argument, "make_kan: need at least two widths");
  KanModel model;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    KanLayer layer(widths[l], widths[l + 1],
                   build_grid(init.degree, init.intervals, init.t_min, init.t_max));
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
    for (double& w : layer.w_base) w = rng.uniform(-1.0, 1.0) * scale;
    std::fill(layer.w_spline.begin(), layer.w_spline.end(), scale);
    for (double& c : layer.coeffs) c = rng.normal(0.0, init.coeff_stddev);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

double edge_activation(const KanLayer& layer, std::size_t j, std::size_t i, double x) {
  require(j < layer.out_dim && i < layer.in_dim, ErrorKind::dimension,
          "edge_activation: edge index out of range");
  const std::size_t e = layer.edge(j, i);
  if (!layer.mask[e]) return 0.0;
  const BasisSpan sp = eval_basis_span(layer.grid, x, false);
  auto c = layer.edge_coeffs(j, i);
  double spline = 0.0;
  for (std::size_t r = 0; r < layer.grid.order(); ++r) spline += c[sp.first + r] * sp.values[r];
  return layer.w_base[e] * silu(x) + layer.w_spline[e] * spline;
}

namespace {

void fill_cache(const KanLayer& layer, const Mat& x, KanLayerCache& c) {
  const std::size_t n = x.rows() * layer.in_dim;
  const std::size_t order = layer.grid.order();
  c.input = x;
  c.silu_values.resize(n);
  c.silu_slopes.resize(n);
  c.in_domain.resize(n);
  c.span_first.resize(n);
  c.basis.resize(n * order);
  c.basis_slopes.resize(n * order);
  const auto xv = x.values();
  for (std::size_t k = 0; k < n; ++k) {
    const double v = xv[k];
    c.silu_values[k] = silu(v);
    c.silu_slopes[k] = silu_derivative(v);
    c.in_domain[k] = (v > layer.grid.t_min && v < layer.grid.t_max) ? 1 : 0;
    const BasisSpan sp = eval_basis_span(layer.grid, v, true);
    c.span_first[k] = sp.first;
    std::copy_n(sp.values.begin(), order, c.basis.begin() + static_cast<std::ptrdiff_t>(k * order));
    std::copy_n(sp.derivatives.begin(), order,
                c.basis_slopes.begin() + static_cast<std::ptrdiff_t>(k * order));
  }
}

}  // namespace

Mat layer_forward(const KanLayer& layer, const Mat& x, KanLayerCache* cache) {
  require(x.cols() == layer.in_dim, ErrorKind::dimension,
          "layer_forward: input has " + std::to_string(x.cols()) + " columns, layer expects " +
              std::to_string(layer.in_dim));
  KanLayerCache local;
  KanLayerCache& c = cache ? *cache : local;
  fill_cache(layer, x, c);

  const std::size_t in = layer.in_dim;
  const std::size_t nb = layer.basis_count();
  const std::size_t order = layer.grid.order();
  Mat y(x.rows(), layer.out_dim);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const std::size_t row = b * in;
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) {
        const std::size_t e = j * in + i;
        if (!layer.mask[e]) continue;
        const double* cf = layer.coeffs.data() + e * nb + c.span_first[row + i];
        const double* bv = c.basis.data() + (row + i) * order;
        double spline = 0.0;
        for (std::size_t r = 0; r < order; ++r) spline += cf[r] * bv[r];
        acc += layer.w_base[e] * c.silu_values[row + i] + layer.w_spline[e] * spline;
      }
      y(b, j) = acc;
    }
  }
  return y;
}

KanForward model_forward(const KanModel& model, const Mat& x, bool keep_cache) {
  require(!model.layers.empty(), ErrorKind::dimension, "model_forward: empty model");
  KanForward out;
  if (keep_cache) out.cache.layers.resize(model.layers.size());
  Mat h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    h = layer_forward(model.layers[l], h, keep_cache ? &out.cache.layers[l] : nullptr);
    if (l == 0) out.layer0.values = h;
  }
  out.output = std::move(h);
  return out;
}

Mat model_predict(const KanModel& model, const Mat& x) { return model_forward(model, x).output; }

Mat layer_backward(const KanLayer& layer, const KanLayerCache& c, const Mat& upstream,
                   KanLayerGrads& g, bool need_input_grad) {
  const std::size_t batch = c.input.rows();
  require(c.input.cols() == layer.in_dim && c.silu_values.size() == batch * layer.in_dim,
          ErrorKind::dimension, "layer_backward: cache does not match layer");
  require(upstream.rows() == batch && upstream.cols() == layer.out_dim, ErrorKind::dimension,
          "layer_backward: upstream gradient shape mismatch");

  const std::size_t in = layer.in_dim;
  const std::size_t nb = layer.basis_count();
  const std::size_t order = layer.grid.order();
  g.coeffs.assign(layer.coeffs.size(), 0.0);
  g.w_base.assign(layer.w_base.size(), 0.0);
  g.w_spline.assign(layer.w_spline.size(), 0.0);
  Mat dx = need_input_grad ? Mat(batch, in) : Mat();

  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t row = b * in;
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      const double gy = upstream(b, j);
      if (gy == 0.0) continue;
      for (std::size_t i = 0; i < in; ++i) {
        const std::size_t e = j * in + i;
        if (!layer.mask[e]) continue;
        const std::size_t k = row + i;
        const std::size_t first = c.span_first[k];
        const double* cf = layer.coeffs.data() + e * nb + first;
        double* gcf = g.coeffs.data() + e * nb + first;
        const double* bv = c.basis.data() + k * order;
        const double ws = layer.w_spline[e];
        double spline = 0.0;
        for (std::size_t r = 0; r < order; ++r) {
          spline += cf[r] * bv[r];
          gcf[r] += gy * ws * bv[r];
        }
        g.w_base[e] += gy * c.silu_values[k];
        g.w_spline[e] += gy * spline;
        if (need_input_grad) {
          double slope = layer.w_base[e] * c.silu_slopes[k];
          if (c.in_domain[k]) {
            const double* dv = c.basis_slopes.data() + k * order;
            double ds = 0.0;
            for (std::size_t r = 0; r < order; ++r) ds += cf[r] * dv[r];
            slope += ws * ds;
          }
          dx(b, i) += gy * slope;
        }
      }
    }
  }
  return dx;
}

KanGrads model_backward(const KanModel& model, const Mat& upstream, const KanForwardCache& cache) {
  require(cache.layers.size() == model.layers.size(), ErrorKind::invalid_argument,
          "model_backward: missing or stale forward cache");
  KanGrads grads;
  grads.layers.resize(model.layers.size());
  Mat g = upstream;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    g = layer_backward(model.layers[l], cache.layers[l], g, grads.layers[l], l > 0);
  }
  return grads;
}

std::vector<ParamSlot> kan_param_slots(KanModel& model, const KanGrads& grads,
                                       std::size_t first_layer, std::size_t last_layer) {
  require(grads.layers.size() == model.layers.size(), ErrorKind::dimension,
          "kan_param_slots: gradient/model layer count mismatch");
  last_layer = std::min(last_layer, model.layers.size());
  std::vector<ParamSlot> slots;
  for (std::size_t l = first_layer; l < last_layer; ++l) {
    auto& layer = model.layers[l];
    const auto& g = grads.layers[l];
    slots.push_back({layer.coeffs, g.coeffs});
    slots.push_back({layer.w_base, g.w_base});
    slots.push_back({layer.w_spline, g.w_spline});
  }
  return slots;
}

namespace {

std::vector<double> importance_from_cache(const KanLayer& layer, const KanLayerCache& c) {
  const std::size_t batch = c.input.rows();
  const std::size_t in = layer.in_dim;
  const std::size_t nb = layer.basis_count();
  const std::size_t order = layer.grid.order();
  std::vector<double> imp(layer.edge_count(), 0.0);
  for (std::size_t j = 0; j < layer.out_dim; ++j) {
    for (std::size_t i = 0; i < in; ++i) {
      const std::size_t e = j * in + i;
      if (!layer.mask[e]) continue;
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t k = b * in + i;
        const double* cf = layer.coeffs.data() + e * nb + c.span_first[k];
        const double* bv = c.basis.data() + k * order;
        double spline = 0.0;
        for (std::size_t r = 0; r < order; ++r) spline += cf[r] * bv[r];
        acc += std::abs(layer.w_base[e] * c.silu_values[k] + layer.w_spline[e] * spline);
      }
      imp[e] = acc / static_cast<double>(batch);
    }
  }
  return imp;
}

}  // namespace

std::vector<double> edge_importance(const KanModel& model, std::size_t layer_index,
                                    const Mat& calibration) {
  require(calibration.rows() > 0, ErrorKind::invalid_argument,
          "edge_importance: empty calibration batch");
  require(layer_index < model.layers.size(), ErrorKind::dimension,
          "edge_importance: layer index out of range");
  Mat h = calibration;
  for (std::size_t l = 0; l < layer_index; ++l) h = layer_forward(model.layers[l], h);
  KanLayerCache c;
  layer_forward(model.layers[layer_index], h, &c);
  return importance_from_cache(model.layers[layer_index], c);
}

KanModel prune_kan(const KanModel& model, double ratio, const Mat& calibration) {
  const std::size_t total = model.edge_count();
  const std::size_t k = pruned_count(ratio, total);
  KanModel out = model;
  if (k == 0) return out;
  require(calibration.rows() > 0, ErrorKind::invalid_argument, "prune_kan: empty calibration");

  struct Ranked {
    double importance;
    std::size_t layer;
    std::size_t edge;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(total);
  Mat h = calibration;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    KanLayerCache c;
    Mat next = layer_forward(model.layers[l], h, &c);
    const auto imp = importance_from_cache(model.layers[l], c);
    for (std::size_t e = 0; e < imp.size(); ++e) ranked.push_back({imp[e], l, e});
    h = std::move(next);
  }
  // Edge index e = j*in + i, so (layer, e) order is (layer, j, i) order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.importance < b.importance; });
  for (std::size_t r = 0; r < k; ++r) out.layers[ranked[r].layer].mask[ranked[r].edge] = 0;
  out.zero_masked();
  return out;
}

}  // namespace kanwm

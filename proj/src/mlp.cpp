#include "kanwm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kanwm/error.hpp"

namespace kanwm {

std::vector<std::size_t> MlpModel::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().weight.cols());
  for (const auto& l : layers) w.push_back(l.weight.rows());
  return w;
}

std::size_t MlpModel::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size();
  return n;
}

MlpModel make_mlp(std::span<const std::size_t> widths, MlpHead head, Rng& rng) {
  require(widths.size() >= 2, ErrorKind::invalid_argument, "make_mlp: need at least two widths");
  MlpModel m;
  m.head = head;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    require(widths[l] > 0 && widths[l + 1] > 0, ErrorKind::invalid_argument,
            "make_mlp: widths must be positive");
    DenseLayer d{Mat(widths[l + 1], widths[l]), std::vector<double>(widths[l + 1], 0.0)};
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[l]));
    for (double& w : d.weight.values()) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(d));
  }
  return m;
}

namespace {

Mat affine(const DenseLayer& d, const Mat& x) {
  require(x.cols() == d.weight.cols(), ErrorKind::dimension,
          "mlp: input has " + std::to_string(x.cols()) + " columns, layer expects " +
              std::to_string(d.weight.cols()));
  Mat y(x.rows(), d.weight.rows());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    auto xr = x.row(b);
    for (std::size_t o = 0; o < d.weight.rows(); ++o) {
      auto wr = d.weight.row(o);
      double acc = d.bias[o];
      for (std::size_t i = 0; i < xr.size(); ++i) acc += wr[i] * xr[i];
      y(b, o) = acc;
    }
  }
  return y;
}

void relu_inplace(Mat& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Mat mlp_forward(const MlpModel& model, const Mat& x, MlpCache& cache) {
  require(!model.layers.empty(), ErrorKind::dimension, "mlp_forward: empty model");
  cache.inputs.clear();
  Mat h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    cache.inputs.push_back(h);
    h = affine(model.layers[l], h);
    if (l + 1 < model.layers.size()) relu_inplace(h);
  }
  return h;
}

Mat mlp_forward(const MlpModel& model, const Mat& x) {
  require(!model.layers.empty(), ErrorKind::dimension, "mlp_forward: empty model");
  Mat h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    h = affine(model.layers[l], h);
    if (l + 1 < model.layers.size()) relu_inplace(h);
  }
  return h;
}

MlpGrads mlp_backward(const MlpModel& model, const MlpCache& cache, const Mat& upstream) {
  require(cache.inputs.size() == model.layers.size(), ErrorKind::invalid_argument,
          "mlp_backward: missing or stale forward cache");
  MlpGrads g;
  g.weight.resize(model.layers.size());
  g.bias.resize(model.layers.size());
  Mat dy = upstream;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& d = model.layers[l];
    const Mat& x = cache.inputs[l];
    require(dy.rows() == x.rows() && dy.cols() == d.weight.rows(), ErrorKind::dimension,
            "mlp_backward: upstream gradient shape mismatch");
    Mat gw(d.weight.rows(), d.weight.cols());
    std::vector<double> gb(d.bias.size(), 0.0);
    for (std::size_t b = 0; b < x.rows(); ++b) {
      auto xr = x.row(b);
      for (std::size_t o = 0; o < d.weight.rows(); ++o) {
        const double gy = dy(b, o);
        if (gy == 0.0) continue;
        gb[o] += gy;
        auto gwr = gw.row(o);
        for (std::size_t i = 0; i < xr.size(); ++i) gwr[i] += gy * xr[i];
      }
    }
    if (l > 0) {
      Mat dx(x.rows(), x.cols());
      for (std::size_t b = 0; b < x.rows(); ++b) {
        for (std::size_t o = 0; o < d.weight.rows(); ++o) {
          const double gy = dy(b, o);
          if (gy == 0.0) continue;
          auto wr = d.weight.row(o);
          for (std::size_t i = 0; i < x.cols(); ++i) dx(b, i) += gy * wr[i];
        }
        // x is a relu output, so the relu gate is x > 0.
        for (std::size_t i = 0; i < x.cols(); ++i) {
          if (x(b, i) <= 0.0) dx(b, i) = 0.0;
        }
      }
      dy = std::move(dx);
    }
    g.weight[l] = std::move(gw);
    g.bias[l] = std::move(gb);
  }
  return g;
}

std::vector<ParamSlot> mlp_param_slots(MlpModel& model, const MlpGrads& grads) {
  std::vector<ParamSlot> slots;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    slots.push_back({model.layers[l].weight.values(), grads.weight[l].values()});
    slots.push_back({model.layers[l].bias, grads.bias[l]});
  }
  return slots;
}

double mlp_train_step(MlpModel& model, const Mat& batch, std::span<const int> labels,
                      Optimizer& opt) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "mlp_train_step: empty batch");
  require(model.head == MlpHead::logits, ErrorKind::invalid_argument,
          "mlp_train_step: class labels need a logits head");
  MlpCache cache;
  Mat logits = mlp_forward(model, batch, cache);
  LossResult l = cross_entropy_loss(logits, labels);
  MlpGrads g = mlp_backward(model, cache, l.grad);
  auto slots = mlp_param_slots(model, g);
  opt.step(slots);
  return l.loss;
}

double mlp_train_step(MlpModel& model, const Mat& batch, const Mat& targets, Optimizer& opt) {
  require(batch.rows() > 0, ErrorKind::invalid_argument, "mlp_train_step: empty batch");
  MlpCache cache;
  Mat pred = mlp_forward(model, batch, cache);
  LossResult l = mse_loss(pred, targets);
  MlpGrads g = mlp_backward(model, cache, l.grad);
  auto slots = mlp_param_slots(model, g);
  opt.step(slots);
  return l.loss;
}

MlpModel prune_mlp(const MlpModel& model, double ratio) {
  const std::size_t total = model.weight_count();
  const std::size_t k = pruned_count(ratio, total);
  MlpModel out = model;
  if (k == 0) return out;
  struct Entry {
    double magnitude;
    std::size_t layer;
    std::size_t index;
  };
  std::vector<Entry> entries;
  entries.reserve(total);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto w = model.layers[l].weight.values();
    for (std::size_t k2 = 0; k2 < w.size(); ++k2) entries.push_back({std::abs(w[k2]), l, k2});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.magnitude < b.magnitude; });
  for (std::size_t r = 0; r < k; ++r) {
    out.layers[entries[r].layer].weight.values()[entries[r].index] = 0.0;
  }
  return out;
}

}  // namespace kanwm

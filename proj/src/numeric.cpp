#include "kanwm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kanwm/error.hpp"

namespace kanwm {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorKind::dimension,
          "Mat: data length " + std::to_string(data_.size()) + " != rows*cols");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorKind::dimension, "Mat: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool Mat::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat Mat::gather_rows(std::span<const std::size_t> indices) const {
  Mat out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] < rows_, ErrorKind::dimension, "gather_rows: index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[r] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_derivative(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

LossResult mse_loss(const Mat& pred, const Mat& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorKind::dimension,
          "mse_loss: shape mismatch");
  LossResult res{0.0, Mat(pred.rows(), pred.cols())};
  const auto n = static_cast<double>(pred.size());
  if (pred.size() == 0) return res;
  auto p = pred.values();
  auto t = target.values();
  auto g = res.grad.values();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double d = p[k] - t[k];
    acc += d * d;
    g[k] = 2.0 * d / n;
  }
  res.loss = acc / n;
  return res;
}

LossResult cross_entropy_loss(const Mat& logits, std::span<const int> labels) {
  require(labels.size() == logits.rows(), ErrorKind::dimension,
          "cross_entropy_loss: label count != rows");
  require(logits.rows() > 0, ErrorKind::dimension, "cross_entropy_loss: empty batch");
  LossResult res{0.0, softmax_rows(logits)};
  const auto rows = static_cast<double>(logits.rows());
  double acc = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < logits.cols(), ErrorKind::dimension,
            "cross_entropy_loss: label " + std::to_string(y) + " out of range");
    auto g = res.grad.row(r);
    acc -= std::log(std::max(g[static_cast<std::size_t>(y)], 1e-300));
    g[static_cast<std::size_t>(y)] -= 1.0;
    for (double& v : g) v /= rows;
  }
  res.loss = acc / rows;
  return res;
}

std::vector<int> argmax_rows(const Mat& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::size_t pruned_count(double ratio, std::size_t total) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorKind::invalid_argument,
          "pruning ratio must lie in [0, 1]");
  // Absorb representation error such as 0.29 * 100 = 28.999999999999996.
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total) + 1e-9));
  return std::min(k, total);
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  require(config_.learning_rate >= 0.0 && std::isfinite(config_.learning_rate),
          ErrorKind::invalid_argument, "optimizer: learning rate must be finite and >= 0");
}

void Optimizer::step(std::span<const ParamSlot> slots) {
  for (const auto& s : slots) {
    require(s.value.size() == s.grad.size(), ErrorKind::dimension,
            "optimizer: parameter/gradient size mismatch");
  }
  ++step_count_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (const auto& s : slots) {
      for (std::size_t k = 0; k < s.value.size(); ++k) s.value[k] -= lr * s.grad[k];
    }
    return;
  }

  if (m_.empty()) {
    for (const auto& s : slots) {
      m_.emplace_back(s.value.size(), 0.0);
      v_.emplace_back(s.value.size(), 0.0);
    }
  }
  require(m_.size() == slots.size(), ErrorKind::dimension, "optimizer: slot count changed");
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& m = m_[s];
    auto& v = v_[s];
    require(m.size() == slots[s].value.size(), ErrorKind::dimension,
            "optimizer: moment shape does not match parameter");
    auto value = slots[s].value;
    auto grad = slots[s].grad;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace kanwm

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace kanwm {

// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  // Rows selected by index, in the given order.
  Mat gather_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double sigmoid(double x);
double silu(double x);
double silu_derivative(double x);

// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);

struct LossResult {
  double loss = 0.0;
  Mat grad;
};

// Mean squared error over all elements; grad = 2 (pred - target) / count.
LossResult mse_loss(const Mat& pred, const Mat& target);

// Mean softmax cross-entropy; grad = (softmax - onehot) / rows.
LossResult cross_entropy_loss(const Mat& logits, std::span<const int> labels);

std::vector<int> argmax_rows(const Mat& m);

// floor(ratio * total) for ratio in [0, 1], tolerant of representation error.
std::size_t pruned_count(double ratio, std::size_t total);

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One trainable tensor and the gradient that goes with it.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
};

// First-order optimizer. Adam moments are allocated on the first step and
// bound to the slot layout seen then; later steps must present the same
// layout.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void step(std::span<const ParamSlot> slots);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return step_count_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  OptimizerConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace kanwm

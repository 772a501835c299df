#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kanwm/numeric.hpp"
#include "kanwm/rng.hpp"

namespace kanwm {

struct DenseLayer {
  Mat weight;                // [out x in]
  std::vector<double> bias;  // [out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class MlpHead { logits, scalar };

// affine -> relu for every hidden layer, final affine left raw.
struct MlpModel {
  std::vector<DenseLayer> layers;
  MlpHead head = MlpHead::logits;

  std::vector<std::size_t> widths() const;
  std::size_t weight_count() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

// He-uniform weights, zero biases.
MlpModel make_mlp(std::span<const std::size_t> widths, MlpHead head, Rng& rng);

Mat mlp_forward(const MlpModel& model, const Mat& x);

struct MlpCache {
  std::vector<Mat> inputs;  // input of each affine layer (post-relu for hidden)
};

struct MlpGrads {
  std::vector<Mat> weight;
  std::vector<std::vector<double>> bias;
};

Mat mlp_forward(const MlpModel& model, const Mat& x, MlpCache& cache);
MlpGrads mlp_backward(const MlpModel& model, const MlpCache& cache, const Mat& upstream);
std::vector<ParamSlot> mlp_param_slots(MlpModel& model, const MlpGrads& grads);

// One optimizer step on cross-entropy (logits head) or MSE (scalar head).
// Returns the loss measured before the update.
double mlp_train_step(MlpModel& model, const Mat& batch, std::span<const int> labels,
                      Optimizer& opt);
double mlp_train_step(MlpModel& model, const Mat& batch, const Mat& targets, Optimizer& opt);

// Zeroes the floor(ratio * W) smallest-magnitude weights over all layers;
// biases untouched, ties resolved in traversal order.
MlpModel prune_mlp(const MlpModel& model, double ratio);

}  // namespace kanwm

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "kanwm/data.hpp"
#include "kanwm/kan.hpp"
#include "kanwm/mlp.hpp"

namespace kanwm {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer{};
};

// Classification: `accuracy` in [0, 1] and mean cross-entropy `loss`.
// Regression: `rmse` and mean squared error `loss`.
struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double rmse = 0.0;
};

// Softmax cross-entropy for classification, MSE on the scalar output for
// regression. Updates every layer; masked edges stay at zero.
double kan_main_step(KanModel& model, const Dataset& batch, Optimizer& opt);

using KanStepHook = std::function<void(KanModel&, const Dataset& batch)>;

// Main-task training over `options.epochs` reshuffled epochs. `after_step`
// runs after each batch's update.
void train_kan(KanModel& model, const Dataset& train, const TrainOptions& options,
               std::uint64_t shuffle_seed, const KanStepHook& after_step = {});

void train_mlp(MlpModel& model, const Dataset& train, const TrainOptions& options,
               std::uint64_t shuffle_seed);

Metrics evaluate(const KanModel& model, const Dataset& data);
Metrics evaluate(const MlpModel& model, const Dataset& data);

}  // namespace kanwm

#include "kanwm/training.hpp"

#include <cmath>

#include "kanwm/error.hpp"

namespace kanwm {

double kan_main_step(KanModel& model, const Dataset& batch, Optimizer& opt) {
  require(!batch.empty(), ErrorKind::invalid_argument, "kan_main_step: empty batch");
  KanForward fwd = model_forward(model, batch.inputs, true);
  LossResult loss = batch.task == TaskKind::classification
                        ? cross_entropy_loss(fwd.output, batch.labels)
                        : mse_loss(fwd.output, batch.target_matrix());
  KanGrads grads = model_backward(model, loss.grad, fwd.cache);
  auto slots = kan_param_slots(model, grads);
  opt.step(slots);
  model.zero_masked();
  return loss.loss;
}

void train_kan(KanModel& model, const Dataset& train, const TrainOptions& options,
               std::uint64_t shuffle_seed, const KanStepHook& after_step) {
  if (options.epochs == 0) return;
  require(!train.empty(), ErrorKind::data, "train_kan: empty training set");
  Optimizer opt(options.optimizer);
  BatchSchedule schedule(train.size(), options.batch_size, shuffle_seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& idx : schedule.next_epoch()) {
      Dataset batch = train.subset(idx);
      kan_main_step(model, batch, opt);
      if (after_step) after_step(model, batch);
    }
  }
}

void train_mlp(MlpModel& model, const Dataset& train, const TrainOptions& options,
               std::uint64_t shuffle_seed) {
  if (options.epochs == 0) return;
  require(!train.empty(), ErrorKind::data, "train_mlp: empty training set");
  Optimizer opt(options.optimizer);
  BatchSchedule schedule(train.size(), options.batch_size, shuffle_seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& idx : schedule.next_epoch()) {
      Dataset batch = train.subset(idx);
      if (batch.task == TaskKind::classification) {
        mlp_train_step(model, batch.inputs, batch.labels, opt);
      } else {
        mlp_train_step(model, batch.inputs, batch.target_matrix(), opt);
      }
    }
  }
}

namespace {

Metrics metrics_from_output(const Mat& out, const Dataset& data) {
  Metrics m;
  if (data.task == TaskKind::classification) {
    m.loss = cross_entropy_loss(out, data.labels).loss;
    const auto pred = argmax_rows(out);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) hits += pred[r] == data.labels[r] ? 1 : 0;
    m.accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());
  } else {
    m.loss = mse_loss(out, data.target_matrix()).loss;
    m.rmse = std::sqrt(m.loss);
  }
  return m;
}

}  // namespace

Metrics evaluate(const KanModel& model, const Dataset& data) {
  require(!data.empty(), ErrorKind::data, "evaluate: empty dataset");
  return metrics_from_output(model_predict(model, data.inputs), data);
}

Metrics evaluate(const MlpModel& model, const Dataset& data) {
  require(!data.empty(), ErrorKind::data, "evaluate: empty dataset");
  return metrics_from_output(mlp_forward(model, data.inputs), data);
}

}  // namespace kanwm

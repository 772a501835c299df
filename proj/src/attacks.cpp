#include "kanwm/attacks.hpp"

#include <cmath>

#include "kanwm/error.hpp"

namespace kanwm {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::finetune: return "finetune";
    case AttackKind::prune: return "prune";
    case AttackKind::retrain_after_prune: return "retrain";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "finetune") return AttackKind::finetune;
  if (name == "prune") return AttackKind::prune;
  if (name == "retrain" || name == "retrain_after_prune") return AttackKind::retrain_after_prune;
  fail(ErrorKind::config, "unknown attack kind '" + std::string(name) + "'");
}

AttackSpec AttackSpec::finetune_small_lr(std::uint64_t seed) {
  return {AttackKind::finetune, 1e-3, 8, 0.0, seed};
}
AttackSpec AttackSpec::finetune_large_lr(std::uint64_t seed) {
  return {AttackKind::finetune, 1e-2, 8, 0.0, seed};
}
AttackSpec AttackSpec::pruning(std::uint64_t seed) {
  return {AttackKind::prune, 0.0, 0, 0.6, seed};
}
AttackSpec AttackSpec::retrain(std::uint64_t seed) {
  return {AttackKind::retrain_after_prune, 1e-3, 8, 0.6, seed};
}

void AttackSpec::validate() const {
  require(prune_ratio >= 0.0 && prune_ratio <= 1.0, ErrorKind::config,
          "attack: prune ratio must lie in [0, 1]");
  if (kind != AttackKind::prune && epochs > 0) {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::config,
            "attack: learning rate must be > 0 when training");
  }
}

KanModel finetune(KanModel model, const Dataset& data, std::size_t epochs, double lr,
                  std::size_t batch_size, std::uint64_t seed) {
  require(!data.empty(), ErrorKind::data, "finetune: empty dataset");
  require(lr >= 0.0, ErrorKind::invalid_argument, "finetune: negative learning rate");
  TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = batch_size;
  opts.optimizer.learning_rate = lr;
  train_kan(model, data, opts, seed);
  return model;
}

KanModel prune_attack(const KanModel& model, double ratio, const Mat& calibration) {
  return prune_kan(model, ratio, calibration);
}

KanModel retrain_after_prune(const KanModel& model, double ratio, double lr, std::size_t epochs,
                             const Dataset& data, const Mat& calibration, std::size_t batch_size,
                             std::uint64_t seed) {
  KanModel pruned = prune_attack(model, ratio, calibration);
  pruned.lift_masks();
  if (epochs == 0) return pruned;
  return finetune(std::move(pruned), data, epochs, lr, batch_size, seed);
}

KanModel run_attack(const KanModel& model, const AttackSpec& spec, const Dataset& data,
                    const Mat& calibration, std::size_t batch_size) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::finetune:
      return finetune(model, data, spec.epochs, spec.lr, batch_size, spec.seed);
    case AttackKind::prune:
      return prune_attack(model, spec.prune_ratio, calibration);
    case AttackKind::retrain_after_prune:
      return retrain_after_prune(model, spec.prune_ratio, spec.lr, spec.epochs, data, calibration,
                                 batch_size, spec.seed);
  }
  fail(ErrorKind::config, "unknown attack kind");
}

std::vector<SweepRow> prune_sweep(const KanModel& kan, const MlpModel& mlp, const Dataset& test,
                                  const Mat& calibration, double step) {
  require(step > 0.0 && step <= 1.0, ErrorKind::invalid_argument, "prune_sweep: step in (0, 1]");
  const auto n_steps = static_cast<std::size_t>(std::llround(1.0 / step));
  require(std::abs(static_cast<double>(n_steps) * step - 1.0) < 1e-9, ErrorKind::invalid_argument,
          "prune_sweep: step must divide 1");
  std::vector<SweepRow> rows;
  for (std::size_t s = 0; s <= n_steps; ++s) {
    // Integer-derived ratios keep 0.1 * 3 from drifting below 0.3.
    const double ratio = static_cast<double>(s) / static_cast<double>(n_steps);
    SweepRow row;
    row.ratio = ratio;
    row.mlp = evaluate(prune_mlp(mlp, ratio), test);
    row.kan = evaluate(prune_kan(kan, ratio, calibration), test);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace kanwm

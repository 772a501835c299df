#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kanwm/data.hpp"
#include "kanwm/kan.hpp"
#include "kanwm/mlp.hpp"
#include "kanwm/training.hpp"

namespace kanwm {

enum class AttackKind { finetune, prune, retrain_after_prune };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);  // finetune | prune | retrain

struct AttackSpec {
  AttackKind kind = AttackKind::finetune;
  double lr = 1e-3;
  std::size_t epochs = 8;
  double prune_ratio = 0.0;  // used by prune and retrain_after_prune
  std::uint64_t seed = 0;

  static AttackSpec finetune_small_lr(std::uint64_t seed = 0);  // lr 0.001, 8 epochs
  static AttackSpec finetune_large_lr(std::uint64_t seed = 0);  // lr 0.01, 8 epochs
  static AttackSpec pruning(std::uint64_t seed = 0);            // ratio 0.6
  static AttackSpec retrain(std::uint64_t seed = 0);            // ratio 0.6, lr 0.001, 8 epochs

  void validate() const;
};

// Continued main-task training with a fresh Adam state.
KanModel finetune(KanModel model, const Dataset& data, std::size_t epochs, double lr,
                  std::size_t batch_size, std::uint64_t seed);

KanModel prune_attack(const KanModel& model, double ratio, const Mat& calibration);

// Prune, lift the masks (pruned parameters restart from zero), retrain.
KanModel retrain_after_prune(const KanModel& model, double ratio, double lr, std::size_t epochs,
                             const Dataset& data, const Mat& calibration, std::size_t batch_size,
                             std::uint64_t seed);

KanModel run_attack(const KanModel& model, const AttackSpec& spec, const Dataset& data,
                    const Mat& calibration, std::size_t batch_size);

struct SweepRow {
  double ratio = 0.0;
  Metrics mlp;
  Metrics kan;
};

// Each ratio 0, step, 2*step, ..., 1 is applied to the original models.
std::vector<SweepRow> prune_sweep(const KanModel& kan, const MlpModel& mlp, const Dataset& test,
                                  const Mat& calibration, double step = 0.1);

}  // namespace kanwm

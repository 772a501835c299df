#pragma once

#include <vector>

#include "kanwm/checkpoint.hpp"
#include "kanwm/config.hpp"
#include "kanwm/report.hpp"
#include "kanwm/watermark.hpp"

namespace kanwm {

// The experiment stages behind the command-line tool. Each stage takes the
// loaded data explicitly so callers can share it between stages, and
// returns its artifacts without touching the filesystem.

struct StageResult {
  Checkpoint checkpoint;
  ReportRow row;
};

// Clean KAN (or matched-width MLP) trained with the "init" and "shuffle"
// sub-seeds.
StageResult run_train_clean(const ExperimentConfig& config, const ExperimentData& data,
                            ModelKind kind);

struct EmbedResult {
  Checkpoint watermarked;
  Checkpoint detector;
  PerturbationSignal signal;
  EmbedTrace trace;
  ReportRow row;
};

// Watermarked training from the same initialization and batch order as the
// clean run, then detector training on (watermarked, clean) layer-0 rows.
// The amplitude is calibrated on the clean model unless set explicitly.
EmbedResult run_embed(const ExperimentConfig& config, const ExperimentData& data,
                      const Checkpoint& clean);

StageResult run_attack(const ExperimentConfig& config, const ExperimentData& data,
                       const Checkpoint& watermarked, const AttackSpec& attack);

struct VerifyResult {
  VerificationResult result;
  ReportRow row;
};

// Detection rate of `suspect` on the held-out split.
VerifyResult run_verify(const ExperimentConfig& config, const ExperimentData& data,
                        const Checkpoint& detector, const Checkpoint& suspect,
                        double threshold);

// One row per (ratio, model), ratios 0, 0.1, ..., 1.
std::vector<ReportRow> run_prune_sweep(const ExperimentConfig& config, const ExperimentData& data,
                                       const Checkpoint& kan, const Checkpoint& mlp);

// Main metric as reported: accuracy in percent or RMSE.
double main_metric(TaskKind task, const Metrics& m);

}  // namespace kanwm

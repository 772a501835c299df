#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kanwm/data.hpp"
#include "kanwm/kan.hpp"
#include "kanwm/mlp.hpp"
#include "kanwm/training.hpp"

namespace kanwm {

// Inclusive range of DCT frequency indices.
struct FrequencyBand {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t width() const noexcept { return hi - lo + 1; }
  friend bool operator==(const FrequencyBand&, const FrequencyBand&) = default;
};

// [floor(N/4), floor(N/2)], capped at N - 1.
FrequencyBand default_band(std::size_t length);

// Keyed frequency-domain perturbation: values[k] = +-amplitude inside the
// band, 0 elsewhere. Fully determined by (key, length, band, amplitude).
struct PerturbationSignal {
  std::uint64_t key = 0;
  std::size_t length = 0;
  FrequencyBand band;
  double amplitude = 0.0;
  std::vector<double> values;

  friend bool operator==(const PerturbationSignal&, const PerturbationSignal&) = default;
};

PerturbationSignal gen_signal(std::uint64_t key, std::size_t length, FrequencyBand band,
                              double amplitude);

// factor * RMS of the in-band DCT coefficients of the model's layer-0
// outputs over `calibration`.
double calibrate_amplitude(const KanModel& clean, const Mat& calibration, FrequencyBand band,
                           double factor = 0.3);

// Perturbed layer-0 targets, one row per row of `layer0`. Computed as
// O + idct(P), which equals idct(dct(O) + P) by linearity and is exactly
// O when P is zero.
Mat signal_targets(const Mat& layer0, const PerturbationSignal& signal);

// One update of layer 0 towards fixed targets; deeper layers are not
// touched. Returns the signal loss MSE(O, targets) before the update.
double signal_step(KanModel& model, const Mat& x, const Mat& targets, Optimizer& opt);

// Activation-update phase: targets recomputed from the current outputs,
// then signal_step.
double watermark_step(KanModel& model, const Mat& x, const PerturbationSignal& signal,
                      Optimizer& opt);

// Phase 2 defaults to plain gradient descent so the per-step change of
// the layer-0 outputs scales with the signal amplitude; Adam would
// normalize the amplitude away.
struct EmbedOptions {
  TrainOptions main;
  double lr_watermark = 0.1;
  OptimizerKind watermark_optimizer = OptimizerKind::sgd;
};

struct EmbedTrace {
  std::vector<double> signal_losses;
};

// Two-phase training: per batch, a main-task step on all parameters, then
// a watermark step on layer 0 only. `model` is the starting point.
KanModel embed(KanModel model, const PerturbationSignal& signal, const Dataset& train,
               const EmbedOptions& options, std::uint64_t shuffle_seed,
               EmbedTrace* trace = nullptr);

enum class Provenance : std::uint8_t { wm, wm_shuffled, clean, clean_shuffled };

struct DetectorDataset {
  Mat inputs;
  std::vector<int> labels;
  std::vector<Provenance> provenance;
};

// For every sample: the watermarked and clean layer-0 rows plus
// `n_shuffles` random permutations of each. Label 1 for wm rows.
DetectorDataset build_detector_dataset(const KanModel& watermarked, const KanModel& clean,
                                       const Mat& samples, std::size_t n_shuffles,
                                       std::uint64_t seed);

struct DetectorOptions {
  std::vector<std::size_t> hidden{64, 32};
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

MlpModel train_detector(const DetectorDataset& dataset, const DetectorOptions& options);

struct VerificationResult {
  double detection_rate = 0.0;
  double threshold = 0.5;
  bool decision = false;
};

VerificationResult verify(const KanModel& suspect, const MlpModel& detector, const Mat& test_inputs,
                          double threshold = 0.5);

}  // namespace kanwm

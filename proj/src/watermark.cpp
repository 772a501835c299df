#include "kanwm/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kanwm/error.hpp"
#include "kanwm/transform.hpp"

namespace kanwm {

FrequencyBand default_band(std::size_t length) {
  require(length >= 1, ErrorKind::invalid_argument, "default_band: empty signal");
  return {std::min(length / 4, length - 1), std::min(length / 2, length - 1)};
}

PerturbationSignal gen_signal(std::uint64_t key, std::size_t length, FrequencyBand band,
                              double amplitude) {
  require(length >= 1, ErrorKind::invalid_argument, "gen_signal: length must be >= 1");
  require(band.lo <= band.hi && band.hi < length, ErrorKind::invalid_argument,
          "gen_signal: band [" + std::to_string(band.lo) + ", " + std::to_string(band.hi) +
              "] invalid for length " + std::to_string(length));
  require(amplitude >= 0.0 && std::isfinite(amplitude), ErrorKind::invalid_argument,
          "gen_signal: amplitude must be finite and >= 0");
  PerturbationSignal s{key, length, band, amplitude, std::vector<double>(length, 0.0)};
  Rng rng(key);
  for (std::size_t k = band.lo; k <= band.hi; ++k) {
    s.values[k] = (rng.next_u64() >> 63) ? -amplitude : amplitude;
  }
  return s;
}

double calibrate_amplitude(const KanModel& clean, const Mat& calibration, FrequencyBand band,
                           double factor) {
  require(calibration.rows() > 0, ErrorKind::invalid_argument, "calibrate_amplitude: no samples");
  const Mat out = layer_forward(clean.layers.front(), calibration);
  require(band.lo <= band.hi && band.hi < out.cols(), ErrorKind::invalid_argument,
          "calibrate_amplitude: band outside layer-0 width");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto spec = dct(out.row(r));
    for (std::size_t k = band.lo; k <= band.hi; ++k) {
      acc += spec[k] * spec[k];
      ++count;
    }
  }
  return factor * std::sqrt(acc / static_cast<double>(count));
}

Mat signal_targets(const Mat& layer0, const PerturbationSignal& signal) {
  require(layer0.cols() == signal.length, ErrorKind::dimension,
          "signal_targets: signal length " + std::to_string(signal.length) +
              " != layer-0 width " + std::to_string(layer0.cols()));
  const std::vector<double> shift = idct(signal.values);
  Mat t = layer0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += shift[c];
  }
  return t;
}

namespace {

double layer0_update(KanModel& model, const KanLayerCache& cache, const Mat& out,
                     const Mat& targets, Optimizer& opt) {
  LossResult loss = mse_loss(out, targets);
  KanGrads grads;
  grads.layers.resize(model.layers.size());
  layer_backward(model.layers[0], cache, loss.grad, grads.layers[0], false);
  auto slots = kan_param_slots(model, grads, 0, 1);
  opt.step(slots);
  model.zero_masked();
  return loss.loss;
}

}  // namespace

double signal_step(KanModel& model, const Mat& x, const Mat& targets, Optimizer& opt) {
  require(!model.layers.empty(), ErrorKind::dimension, "signal_step: empty model");
  KanLayerCache cache;
  const Mat out = layer_forward(model.layers[0], x, &cache);
  return layer0_update(model, cache, out, targets, opt);
}

double watermark_step(KanModel& model, const Mat& x, const PerturbationSignal& signal,
                      Optimizer& opt) {
  require(!model.layers.empty(), ErrorKind::dimension, "watermark_step: empty model");
  KanLayerCache cache;
  const Mat out = layer_forward(model.layers[0], x, &cache);
  return layer0_update(model, cache, out, signal_targets(out, signal), opt);
}

KanModel embed(KanModel model, const PerturbationSignal& signal, const Dataset& train,
               const EmbedOptions& options, std::uint64_t shuffle_seed, EmbedTrace* trace) {
  require(!model.layers.empty() && signal.length == model.layers.front().out_dim,
          ErrorKind::dimension, "embed: signal length does not match layer-0 width");
  require(options.main.epochs >= 1, ErrorKind::invalid_argument, "embed: need at least one epoch");
  OptimizerConfig wm_cfg = options.main.optimizer;
  wm_cfg.learning_rate = options.lr_watermark;
  wm_cfg.kind = options.watermark_optimizer;
  Optimizer wm_opt(wm_cfg);

  // Phase 1 runs inside train_kan; phase 2 is the per-batch hook.
  auto hook = [&](KanModel& m, const Dataset& batch) {
    const double l = watermark_step(m, batch.inputs, signal, wm_opt);
    if (trace) trace->signal_losses.push_back(l);
  };
  train_kan(model, train, options.main, shuffle_seed, hook);
  return model;
}

DetectorDataset build_detector_dataset(const KanModel& watermarked, const KanModel& clean,
                                       const Mat& samples, std::size_t n_shuffles,
                                       std::uint64_t seed) {
  require(samples.rows() > 0, ErrorKind::data, "build_detector_dataset: no samples");
  require(watermarked.layers.front().out_dim == clean.layers.front().out_dim, ErrorKind::dimension,
          "build_detector_dataset: layer-0 widths differ");
  const Mat o_wm = layer_forward(watermarked.layers.front(), samples);
  const Mat o_clean = layer_forward(clean.layers.front(), samples);
  const std::size_t width = o_wm.cols();
  const std::size_t per_source = 1 + n_shuffles;

  DetectorDataset d;
  d.inputs = Mat(samples.rows() * 2 * per_source, width);
  d.labels.reserve(d.inputs.rows());
  d.provenance.reserve(d.inputs.rows());
  Rng rng(seed);
  std::vector<std::size_t> perm(width);
  std::size_t out_row = 0;

  auto emit = [&](std::span<const double> src, bool watermark) {
    auto dst = d.inputs.row(out_row++);
    std::copy(src.begin(), src.end(), dst.begin());
    d.labels.push_back(watermark ? 1 : 0);
    d.provenance.push_back(watermark ? Provenance::wm : Provenance::clean);
    for (std::size_t s = 0; s < n_shuffles; ++s) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      auto sh = d.inputs.row(out_row++);
      for (std::size_t c = 0; c < width; ++c) sh[c] = src[perm[c]];
      d.labels.push_back(watermark ? 1 : 0);
      d.provenance.push_back(watermark ? Provenance::wm_shuffled : Provenance::clean_shuffled);
    }
  };
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    emit(o_wm.row(r), true);
    emit(o_clean.row(r), false);
  }
  return d;
}

MlpModel train_detector(const DetectorDataset& dataset, const DetectorOptions& options) {
  require(dataset.inputs.rows() > 0 && dataset.labels.size() == dataset.inputs.rows(),
          ErrorKind::data, "train_detector: empty or inconsistent dataset");
  const bool has0 = std::find(dataset.labels.begin(), dataset.labels.end(), 0) != dataset.labels.end();
  const bool has1 = std::find(dataset.labels.begin(), dataset.labels.end(), 1) != dataset.labels.end();
  require(has0 && has1, ErrorKind::data, "train_detector: dataset must contain both classes");

  std::vector<std::size_t> widths{dataset.inputs.cols()};
  widths.insert(widths.end(), options.hidden.begin(), options.hidden.end());
  widths.push_back(2);
  Rng init_rng(derive_seed(options.seed, "detector-init"));
  MlpModel detector = make_mlp(widths, MlpHead::logits, init_rng);

  Dataset train;
  train.inputs = dataset.inputs;
  train.labels = dataset.labels;
  train.task = TaskKind::classification;
  TrainOptions t;
  t.epochs = options.epochs;
  t.batch_size = options.batch_size;
  t.optimizer.learning_rate = options.learning_rate;
  train_mlp(detector, train, t, derive_seed(options.seed, "detector-shuffle"));
  return detector;
}

VerificationResult verify(const KanModel& suspect, const MlpModel& detector, const Mat& test_inputs,
                          double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::invalid_argument,
          "verify: threshold must lie in [0, 1]");
  require(test_inputs.rows() > 0, ErrorKind::data, "verify: no test samples");
  require(!detector.layers.empty() &&
              detector.layers.front().weight.cols() == suspect.layers.front().out_dim,
          ErrorKind::dimension, "verify: detector input width != suspect layer-0 width");
  const Mat o = layer_forward(suspect.layers.front(), test_inputs);
  const auto pred = argmax_rows(mlp_forward(detector, o));
  const auto hits = std::count(pred.begin(), pred.end(), 1);
  VerificationResult r;
  r.detection_rate = static_cast<double>(hits) / static_cast<double>(pred.size());
  r.threshold = threshold;
  r.decision = r.detection_rate >= threshold;
  return r;
}

}  // namespace kanwm

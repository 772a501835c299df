#include "kanwm/commands.hpp"

#include "kanwm/attacks.hpp"
#include "kanwm/error.hpp"
#include "kanwm/training.hpp"

namespace kanwm {

using nlohmann::json;

namespace {

const char* metric_name(TaskKind task) {
  return task == TaskKind::classification ? "accuracy" : "rmse";
}

json base_provenance(const ExperimentConfig& config) {
  return json{{"config_hash", config_hash(config)}, {"seeds", seeds_to_json(config.seeds)}};
}

ReportRow base_row(const ExperimentConfig& config, std::string command, std::string stage,
                   ModelKind model) {
  ReportRow row;
  row.command = std::move(command);
  row.stage = std::move(stage);
  row.model = std::string(to_string(model));
  row.metric = metric_name(config.task);
  row.config_hash = config_hash(config);
  row.seeds = config.seeds;
  row.timestamp = utc_timestamp();
  return row;
}

Mat calibration_batch(const ExperimentConfig& config, const Dataset& train) {
  return train.head(std::min(config.calibration_rows, train.size())).inputs;
}

void require_kan(const Checkpoint& ckpt, const ExperimentConfig& config, const Dataset& train,
                 const char* what) {
  require(ckpt.kind == ModelKind::kan, ErrorKind::dimension,
          std::string(what) + ": expected a KAN checkpoint");
  require(ckpt.kan.widths() == model_widths(config, train), ErrorKind::dimension,
          std::string(what) + ": checkpoint widths do not match the configured model");
}

json signal_to_json(const PerturbationSignal& s) {
  return json{{"key", s.key},
              {"length", s.length},
              {"band", {s.band.lo, s.band.hi}},
              {"amplitude", s.amplitude}};
}

json attack_to_json(const AttackSpec& a) {
  json j{{"kind", std::string(to_string(a.kind))},
         {"lr", a.lr},
         {"epochs", a.epochs},
         {"seed", a.seed}};
  if (a.kind != AttackKind::finetune) j["ratio"] = a.prune_ratio;
  return j;
}

}  // namespace

double main_metric(TaskKind task, const Metrics& m) {
  return task == TaskKind::classification ? 100.0 * m.accuracy : m.rmse;
}

StageResult run_train_clean(const ExperimentConfig& config, const ExperimentData& data,
                            ModelKind kind) {
  auto widths = model_widths(config, data.train);
  TrainOptions opts = main_train_options(config);
  Rng init(config.seeds.init);
  StageResult out;
  out.checkpoint.kind = kind;
  out.checkpoint.stage = Stage::clean;
  Metrics metrics;
  if (kind == ModelKind::kan) {
    out.checkpoint.kan = make_kan(widths, config.grid, init);
    train_kan(out.checkpoint.kan, data.train, opts, config.seeds.shuffle);
    metrics = evaluate(out.checkpoint.kan, data.test);
  } else {
    MlpHead head = config.task == TaskKind::classification ? MlpHead::logits : MlpHead::scalar;
    out.checkpoint.mlp = make_mlp(widths, head, init);
    train_mlp(out.checkpoint.mlp, data.train, opts, config.seeds.shuffle);
    metrics = evaluate(out.checkpoint.mlp, data.test);
  }
  out.checkpoint.provenance = base_provenance(config);
  out.row = base_row(config, "train-clean", "clean", kind);
  out.row.main_metric = main_metric(config.task, metrics);
  out.row.details = json{{"loss", metrics.loss}, {"widths", widths}};
  return out;
}

EmbedResult run_embed(const ExperimentConfig& config, const ExperimentData& data,
                      const Checkpoint& clean) {
  require_kan(clean, config, data.train, "embed");
  const KanModel& clean_model = clean.kan;
  const std::size_t n1 = clean_model.layers.front().out_dim;

  FrequencyBand band = config.watermark.band.value_or(default_band(n1));
  require(band.hi < n1, ErrorKind::dimension,
          "watermark band exceeds the layer-0 width " + std::to_string(n1));
  double amplitude = config.watermark.alpha
                         ? *config.watermark.alpha
                         : calibrate_amplitude(clean_model, calibration_batch(config, data.train),
                                               band, config.watermark.alpha_factor);
  EmbedResult out;
  out.signal = gen_signal(config.watermark.key.value_or(config.seeds.signal), n1, band, amplitude);

  Rng init(config.seeds.init);
  KanModel start = make_kan(clean_model.widths(), config.grid, init);
  EmbedOptions eopts;
  eopts.main = main_train_options(config);
  eopts.lr_watermark = config.watermark.lr;
  eopts.watermark_optimizer = config.watermark.optimizer;
  out.watermarked.kind = ModelKind::kan;
  out.watermarked.stage = Stage::watermarked;
  out.watermarked.kan =
      embed(std::move(start), out.signal, data.train, eopts, config.seeds.shuffle, &out.trace);
  out.watermarked.provenance = base_provenance(config);
  out.watermarked.provenance["watermark"] = signal_to_json(out.signal);

  std::size_t samples = std::min(config.detector.samples, data.train.size());
  DetectorDataset dset =
      build_detector_dataset(out.watermarked.kan, clean_model, data.train.head(samples).inputs,
                             config.detector.n_shuffles, derive_seed(config.seeds.detector, "rows"));
  DetectorOptions dopts;
  dopts.hidden = config.detector.hidden;
  dopts.epochs = config.detector.epochs;
  dopts.batch_size = config.detector.batch_size;
  dopts.learning_rate = config.detector.lr;
  dopts.seed = config.seeds.detector;
  out.detector.kind = ModelKind::mlp;
  out.detector.stage = Stage::watermarked;
  out.detector.mlp = train_detector(dset, dopts);
  out.detector.provenance = base_provenance(config);
  out.detector.provenance["role"] = "detector";
  out.detector.provenance["watermark"] = signal_to_json(out.signal);

  Metrics wm_metrics = evaluate(out.watermarked.kan, data.test);
  VerificationResult v =
      verify(out.watermarked.kan, out.detector.mlp, data.test.inputs, config.threshold);
  out.row = base_row(config, "embed", "watermarked", ModelKind::kan);
  out.row.main_metric = main_metric(config.task, wm_metrics);
  out.row.detection_rate = 100.0 * v.detection_rate;
  out.row.decision = v.decision;
  out.row.details = json{{"loss", wm_metrics.loss},
                         {"watermark", signal_to_json(out.signal)},
                         {"lr_wm", config.watermark.lr},
                         {"final_signal_loss", out.trace.signal_losses.empty()
                                                   ? 0.0
                                                   : out.trace.signal_losses.back()}};
  return out;
}

StageResult run_attack(const ExperimentConfig& config, const ExperimentData& data,
                       const Checkpoint& watermarked, const AttackSpec& attack) {
  require_kan(watermarked, config, data.train, "attack");
  attack.validate();
  StageResult out;
  out.checkpoint.kind = ModelKind::kan;
  out.checkpoint.stage = Stage::attacked;
  out.checkpoint.kan = kanwm::run_attack(watermarked.kan, attack, data.train,
                                         calibration_batch(config, data.train),
                                         config.training.batch_size);
  out.checkpoint.provenance = base_provenance(config);
  out.checkpoint.provenance["attack"] = attack_to_json(attack);
  out.checkpoint.provenance["source_stage"] = std::string(to_string(watermarked.stage));
  if (watermarked.provenance.contains("watermark"))
    out.checkpoint.provenance["watermark"] = watermarked.provenance["watermark"];

  Metrics m = evaluate(out.checkpoint.kan, data.test);
  out.row = base_row(config, "attack", "attacked", ModelKind::kan);
  out.row.main_metric = main_metric(config.task, m);
  out.row.details = json{{"loss", m.loss}, {"attack", attack_to_json(attack)}};
  return out;
}

VerifyResult run_verify(const ExperimentConfig& config, const ExperimentData& data,
                        const Checkpoint& detector, const Checkpoint& suspect,
                        double threshold) {
  require(detector.kind == ModelKind::mlp, ErrorKind::dimension,
          "verify: the detector checkpoint must be an MLP");
  require(suspect.kind == ModelKind::kan, ErrorKind::dimension,
          "verify: the suspect checkpoint must be a KAN");
  require(suspect.kan.input_dim() == data.test.dim(), ErrorKind::dimension,
          "verify: suspect input width does not match the test data");
  VerifyResult out;
  out.result = verify(suspect.kan, detector.mlp, data.test.inputs, threshold);
  Metrics m = evaluate(suspect.kan, data.test);
  out.row = base_row(config, "verify", std::string(to_string(suspect.stage)), ModelKind::kan);
  out.row.main_metric = main_metric(config.task, m);
  out.row.detection_rate = 100.0 * out.result.detection_rate;
  out.row.decision = out.result.decision;
  out.row.details = json{{"threshold", threshold}, {"samples", data.test.size()}};
  if (suspect.provenance.contains("attack")) out.row.details["attack"] = suspect.provenance["attack"];
  return out;
}

std::vector<ReportRow> run_prune_sweep(const ExperimentConfig& config, const ExperimentData& data,
                                       const Checkpoint& kan, const Checkpoint& mlp) {
  require_kan(kan, config, data.train, "prune-sweep");
  require(mlp.kind == ModelKind::mlp && mlp.mlp.widths() == kan.kan.widths(), ErrorKind::dimension,
          "prune-sweep: the MLP must match the KAN widths");
  auto table = prune_sweep(kan.kan, mlp.mlp, data.test, calibration_batch(config, data.train));
  std::vector<ReportRow> rows;
  for (const auto& r : table) {
    for (ModelKind kind : {ModelKind::mlp, ModelKind::kan}) {
      const Metrics& m = kind == ModelKind::kan ? r.kan : r.mlp;
      ReportRow row = base_row(config, "prune-sweep", "pruned", kind);
      row.main_metric = main_metric(config.task, m);
      row.details = json{{"ratio", r.ratio}, {"loss", m.loss}};
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace kanwm

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kanwm/commands.hpp"
#include "kanwm/error.hpp"

namespace fs = std::filesystem;
using namespace kanwm;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kDimension = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument: return kConfig;
    case ErrorKind::data:
    case ErrorKind::format: return kData;
    case ErrorKind::dimension: return kDimension;
  }
  return kOther;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string model = "kan";
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "master seed; overrides the config");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

ExperimentConfig config_for(const Common& c) {
  ExperimentConfig config = load_config(c.config);
  if (c.seed) override_seed(config, *c.seed);
  return config;
}

fs::path report_path(const Common& c) { return fs::path(c.out) / "report.jsonl"; }

void emit(const Common& c, const std::vector<ReportRow>& rows) {
  append_report(report_path(c), rows);
  std::vector<nlohmann::json> lines;
  for (const auto& r : rows) lines.push_back(row_to_json(r));
  std::cout << format_report(lines);
}

std::string checkpoint_name(Stage stage, ModelKind kind) {
  return std::string(to_string(stage)) + "-" + std::string(to_string(kind)) + ".json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN training and activation watermarking"};
  app.require_subcommand(1);

  Common train_c;
  auto* train = app.add_subcommand("train-clean", "train a clean KAN or MLP");
  add_common(train, train_c);
  train->add_option("--model", train_c.model, "kan or mlp")
      ->check(CLI::IsMember({"kan", "mlp"}))
      ->capture_default_str();

  Common embed_c;
  std::string embed_clean;
  auto* embed_cmd = app.add_subcommand("embed", "train a watermarked KAN and its detector");
  add_common(embed_cmd, embed_c);
  embed_cmd->add_option("--checkpoint", embed_clean, "clean KAN (default OUT/clean-kan.json)");

  Common attack_c;
  std::string attack_src;
  std::optional<std::string> attack_kind;
  std::optional<double> attack_lr;
  std::optional<std::size_t> attack_epochs;
  std::optional<double> attack_ratio;
  auto* attack = app.add_subcommand("attack", "run removal attacks on a watermarked KAN");
  add_common(attack, attack_c);
  attack->add_option("--checkpoint", attack_src,
                     "watermarked KAN (default OUT/watermarked-kan.json)");
  attack->add_option("--kind", attack_kind, "finetune, prune or retrain; default: config list")
      ->check(CLI::IsMember({"finetune", "prune", "retrain"}));
  attack->add_option("--lr", attack_lr, "attack learning rate");
  attack->add_option("--epochs", attack_epochs, "attack training epochs");
  attack->add_option("--ratio", attack_ratio, "pruning ratio");

  Common verify_c;
  std::string verify_detector;
  std::string verify_suspect;
  std::optional<double> verify_threshold;
  auto* verify_cmd = app.add_subcommand("verify", "detection rate of a suspect KAN");
  add_common(verify_cmd, verify_c);
  verify_cmd->add_option("--detector", verify_detector,
                         "detector (default OUT/watermarked-mlp.json)");
  verify_cmd->add_option("--suspect", verify_suspect,
                         "suspect KAN (default OUT/watermarked-kan.json)");
  verify_cmd->add_option("--threshold", verify_threshold, "decision threshold; overrides config");

  Common sweep_c;
  auto* sweep = app.add_subcommand("prune-sweep", "MLP vs KAN accuracy under pruning");
  add_common(sweep, sweep_c);

  Common report_c;
  auto* report = app.add_subcommand("report", "print OUT/report.jsonl as a table");
  report->add_option("--out", report_c.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train) {
      ExperimentConfig config = config_for(train_c);
      ExperimentData data = load_experiment_data(config);
      ModelKind kind = parse_model_kind(train_c.model);
      StageResult r = run_train_clean(config, data, kind);
      fs::path path = fs::path(train_c.out) / checkpoint_name(Stage::clean, kind);
      save_checkpoint(r.checkpoint, path);
      r.row.details["checkpoint"] = path.generic_string();
      emit(train_c, {r.row});
    } else if (*embed_cmd) {
      ExperimentConfig config = config_for(embed_c);
      ExperimentData data = load_experiment_data(config);
      fs::path src = embed_clean.empty()
                         ? fs::path(embed_c.out) / checkpoint_name(Stage::clean, ModelKind::kan)
                         : fs::path(embed_clean);
      EmbedResult r = run_embed(config, data, load_checkpoint(src));
      fs::path wm = fs::path(embed_c.out) / checkpoint_name(Stage::watermarked, ModelKind::kan);
      fs::path det = fs::path(embed_c.out) / checkpoint_name(Stage::watermarked, ModelKind::mlp);
      save_checkpoint(r.watermarked, wm);
      save_checkpoint(r.detector, det);
      r.row.details["checkpoint"] = wm.generic_string();
      r.row.details["detector"] = det.generic_string();
      emit(embed_c, {r.row});
    } else if (*attack) {
      ExperimentConfig config = config_for(attack_c);
      ExperimentData data = load_experiment_data(config);
      fs::path src = attack_src.empty() ? fs::path(attack_c.out) /
                                              checkpoint_name(Stage::watermarked, ModelKind::kan)
                                        : fs::path(attack_src);
      Checkpoint wm = load_checkpoint(src);
      std::vector<AttackSpec> specs;
      if (attack_kind) {
        AttackSpec spec;
        switch (parse_attack_kind(*attack_kind)) {
          case AttackKind::finetune: spec = AttackSpec::finetune_small_lr(config.seeds.attack); break;
          case AttackKind::prune: spec = AttackSpec::pruning(config.seeds.attack); break;
          case AttackKind::retrain_after_prune: spec = AttackSpec::retrain(config.seeds.attack); break;
        }
        if (attack_lr) spec.lr = *attack_lr;
        if (attack_epochs) spec.epochs = *attack_epochs;
        if (attack_ratio) spec.prune_ratio = *attack_ratio;
        specs.push_back(spec);
      } else {
        specs = config.attacks;
        require(!specs.empty(), ErrorKind::config, "attack: no --kind given and the config lists none");
      }
      std::vector<ReportRow> rows;
      for (std::size_t i = 0; i < specs.size(); ++i) {
        StageResult r = run_attack(config, data, wm, specs[i]);
        std::string name = "attacked-" + std::string(to_string(specs[i].kind));
        if (specs.size() > 1) name += "-" + std::to_string(i);
        fs::path path = fs::path(attack_c.out) / (name + ".json");
        save_checkpoint(r.checkpoint, path);
        r.row.details["checkpoint"] = path.generic_string();
        rows.push_back(std::move(r.row));
      }
      emit(attack_c, rows);
    } else if (*verify_cmd) {
      ExperimentConfig config = config_for(verify_c);
      ExperimentData data = load_experiment_data(config);
      fs::path det = verify_detector.empty() ? fs::path(verify_c.out) /
                                                   checkpoint_name(Stage::watermarked, ModelKind::mlp)
                                             : fs::path(verify_detector);
      fs::path sus = verify_suspect.empty() ? fs::path(verify_c.out) /
                                                  checkpoint_name(Stage::watermarked, ModelKind::kan)
                                            : fs::path(verify_suspect);
      VerifyResult r = run_verify(config, data, load_checkpoint(det), load_checkpoint(sus),
                                  verify_threshold.value_or(config.threshold));
      r.row.details["suspect"] = sus.generic_string();
      emit(verify_c, {r.row});
    } else if (*sweep) {
      ExperimentConfig config = config_for(sweep_c);
      ExperimentData data = load_experiment_data(config);
      StageResult kan = run_train_clean(config, data, ModelKind::kan);
      StageResult mlp = run_train_clean(config, data, ModelKind::mlp);
      std::vector<ReportRow> rows{kan.row, mlp.row};
      auto sweep_rows = run_prune_sweep(config, data, kan.checkpoint, mlp.checkpoint);
      rows.insert(rows.end(), sweep_rows.begin(), sweep_rows.end());
      emit(sweep_c, rows);
    } else if (*report) {
      std::cout << format_report(read_report(report_path(report_c)));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}

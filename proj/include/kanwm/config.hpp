#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kanwm/attacks.hpp"
#include "kanwm/data.hpp"
#include "kanwm/kan.hpp"
#include "kanwm/watermark.hpp"

#include <json.hpp>

namespace kanwm {

inline constexpr int kConfigFormatVersion = 1;

// Named sub-seeds fanned out from one master seed. Each stage draws from
// its own stream so stages can be rerun in isolation.
struct SeedBundle {
  std::uint64_t master = 0;
  std::uint64_t init = 0;
  std::uint64_t data = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t signal = 0;
  std::uint64_t detector = 0;
  std::uint64_t attack = 0;

  static SeedBundle from_master(std::uint64_t master);
  friend bool operator==(const SeedBundle&, const SeedBundle&) = default;
};

enum class DatasetKind { idx, feynman };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::idx;
  // idx: relative paths resolve against ExperimentConfig::base_dir.
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t train_limit = 2000;  // 0 = all rows
  std::size_t test_limit = 500;
  std::size_t pool = 1;
  // feynman
  std::string formula;
  std::size_t n_train = 10000;
  std::size_t n_test = 2000;
};

struct TrainingSpec {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 32;
};

struct WatermarkSpec {
  std::optional<std::uint64_t> key;          // defaults to the "signal" sub-seed
  std::optional<FrequencyBand> band;         // defaults to default_band(n_1)
  std::optional<double> alpha;               // absolute amplitude; overrides alpha_factor
  double alpha_factor = 0.3;
  double lr = 0.1;
  OptimizerKind optimizer = OptimizerKind::sgd;
};

struct DetectorSpec {
  std::vector<std::size_t> hidden{64, 32};
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t n_shuffles = 10;
  std::size_t samples = 2000;  // training rows used to build the detector set
};

struct ExperimentConfig {
  TaskKind task = TaskKind::classification;
  DatasetSpec dataset;
  std::vector<std::size_t> hidden{32};
  std::vector<std::size_t> widths;  // explicit full chain; checked against the data
  KanInit grid;
  TrainingSpec training;
  WatermarkSpec watermark;
  DetectorSpec detector;
  std::vector<AttackSpec> attacks;
  std::size_t calibration_rows = 256;
  double threshold = 0.5;
  SeedBundle seeds = SeedBundle::from_master(0);
  std::filesystem::path base_dir;  // not part of the canonical form
};

// Throws Error(config) on schema or range violations.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form with every default filled in; the basis of config_hash.
nlohmann::json config_to_json(const ExperimentConfig& config);

// Replaces the master seed and every sub-seed derived from it.
void override_seed(ExperimentConfig& config, std::uint64_t master);

// FNV-1a of the canonical JSON text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

nlohmann::json seeds_to_json(const SeedBundle& seeds);

struct ExperimentData {
  Dataset train;
  Dataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

// [input, hidden..., output] for the loaded data; explicit widths must chain.
std::vector<std::size_t> model_widths(const ExperimentConfig& config, const Dataset& train);

TrainOptions main_train_options(const ExperimentConfig& config);

}  // namespace kanwm

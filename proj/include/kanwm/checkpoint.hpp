#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kanwm/kan.hpp"
#include "kanwm/mlp.hpp"

#include <json.hpp>

namespace kanwm {

inline constexpr int kCheckpointFormatVersion = 1;

enum class ModelKind { kan, mlp };
enum class Stage { clean, watermarked, attacked };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Stage stage);
ModelKind parse_model_kind(std::string_view name);

// A model at rest. Exactly one of `kan` / `mlp` is meaningful, per `kind`.
// `provenance` always carries config_hash, seeds and stage; commands add
// their own keys (watermark signal, attack parameters, role).
struct Checkpoint {
  ModelKind kind = ModelKind::kan;
  Stage stage = Stage::clean;
  KanModel kan;
  MlpModel mlp;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Throws Error(format) on version or schema problems.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

// Canonical text: keys sorted, shortest round-trip decimals, trailing newline.
std::string dump_checkpoint(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kanwm

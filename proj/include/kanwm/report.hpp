#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kanwm/config.hpp"

#include <json.hpp>

namespace kanwm {

// One executed stage. `main_metric` is accuracy in percent for
// classification and RMSE for regression; detection rates are percent.
struct ReportRow {
  std::string command;
  std::string stage;
  std::string model;
  std::string metric;  // "accuracy" or "rmse"
  double main_metric = 0.0;
  std::optional<double> detection_rate;
  std::optional<bool> decision;
  nlohmann::json details = nlohmann::json::object();
  std::string config_hash;
  SeedBundle seeds;
  std::string timestamp;  // UTC, ISO 8601; excluded from determinism checks
};

nlohmann::json row_to_json(const ReportRow& row);
// Same as row_to_json without the timestamp.
nlohmann::json row_fingerprint(const ReportRow& row);

std::string utc_timestamp();

// Appends one JSON line per row.
void append_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
std::vector<nlohmann::json> read_report(const std::filesystem::path& path);

// Fixed-width text table of report lines.
std::string format_report(const std::vector<nlohmann::json>& rows);

}  // namespace kanwm

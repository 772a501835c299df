#include "kanwm/report.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "kanwm/error.hpp"

namespace kanwm {

using nlohmann::json;

json row_fingerprint(const ReportRow& row) {
  json j{{"command", row.command},       {"stage", row.stage},
         {"model", row.model},           {"metric", row.metric},
         {"main_metric", row.main_metric}, {"details", row.details},
         {"config_hash", row.config_hash}, {"seeds", seeds_to_json(row.seeds)}};
  j["wm_detection_rate"] = row.detection_rate ? json(*row.detection_rate) : json(nullptr);
  j["decision"] = row.decision ? json(*row.decision) : json(nullptr);
  return j;
}

json row_to_json(const ReportRow& row) {
  json j = row_fingerprint(row);
  j["timestamp"] = row.timestamp;
  return j;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::data, "cannot append to " + path.string());
  for (const auto& row : rows) out << row_to_json(row).dump() << '\n';
  require(static_cast<bool>(out), ErrorKind::data, "write failed for " + path.string());
}

std::vector<json> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open report " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorKind::format,
           path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

std::string format_report(const std::vector<json>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-12s %-5s %-9s %10s %9s %-8s %s\n", "command", "stage",
                "model", "metric", "value", "wm_rate%", "decision", "details");
  out << buf;
  for (const auto& r : rows) {
    std::string rate = "-";
    if (r.contains("wm_detection_rate") && r["wm_detection_rate"].is_number()) {
      std::snprintf(buf, sizeof buf, "%.2f", r["wm_detection_rate"].get<double>());
      rate = buf;
    }
    std::string decision = "-";
    if (r.contains("decision") && r["decision"].is_boolean())
      decision = r["decision"].get<bool>() ? "true" : "false";
    std::string details = r.contains("details") ? r["details"].dump() : "{}";
    std::snprintf(buf, sizeof buf, "%-12s %-12s %-5s %-9s %10.4f %9s %-8s ",
                  r.value("command", "").c_str(), r.value("stage", "").c_str(),
                  r.value("model", "").c_str(), r.value("metric", "").c_str(),
                  r.value("main_metric", 0.0), rate.c_str(), decision.c_str());
    out << buf << details << '\n';
  }
  return out.str();
}

}  // namespace kanwm

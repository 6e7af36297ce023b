#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "moecap/metrics.hpp"
#include "moecap/planner.hpp"

namespace moecap {

std::string sha256_hex(std::string_view bytes);
std::string read_file_bytes(const std::filesystem::path& path);

// Content hashes of the files an output was computed from. Paths are not
// hashed, so moving an input keeps its digest.
class InputDigest {
 public:
  void add_file(std::string role, const std::filesystem::path& path);
  void add_bytes(std::string role, std::string_view bytes);

  // sha256 over "role:sha256\n" lines in insertion order.
  std::string combined() const;
  nlohmann::json to_json() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

nlohmann::json to_json(const PassMetrics& m);
nlohmann::json to_json(const MetricReport& r);
void write_metrics_csv(std::ostream& out, const MetricReport& r, const std::string& digest);

nlohmann::json to_json(const DeploymentRequirement& r);
nlohmann::json to_json(const DeviceVerdict& v);
nlohmann::json to_json(const SweepPoint& p);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep, const std::string& digest);

// Two-space indented JSON followed by a newline.
void write_json(std::ostream& out, const nlohmann::json& doc);

// Quotes a CSV field when needed.
std::string csv_field(std::string_view s);

}  // namespace moecap

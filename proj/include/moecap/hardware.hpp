#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace moecap {

enum class DeviceClass { edge, low_power, workstation, datacenter };

std::string_view to_string(DeviceClass c);
DeviceClass parse_device_class(std::string_view text);

struct HardwareSpec {
  std::string name;
  DeviceClass device_class = DeviceClass::workstation;
  double peak_bandwidth_gbps = 0.0;
  // Effective bandwidth when weights stream from host memory.
  std::optional<double> offload_bandwidth_gbps;
  // FLOP/s keyed by precision name ("fp16", "int8", ...).
  std::map<std::string, double> peak_flops;
  double tdp_watts = 0.0;
  double price_usd = 0.0;
  // GB keyed by tier: "HBM", "DRAM", "SSD".
  std::map<std::string, double> memory_gb;
  // Multi-device system reported as one point (summed bandwidth and TDP).
  bool aggregate = false;
  std::string source;

  // Bandwidth a deployment sees, with or without host offloading.
  double effective_bandwidth_gbps(bool use_offload) const;
  std::optional<double> flops(const std::string& precision) const;
};

using Catalog = std::vector<HardwareSpec>;

void validate(const HardwareSpec& spec);
// Rejects duplicate names and invalid entries.
Catalog catalog_from_json(const nlohmann::json& doc);
Catalog load_catalog(std::istream& in);
Catalog load_catalog_file(const std::filesystem::path& path);
nlohmann::json to_json(const HardwareSpec& spec);
nlohmann::json to_json(const Catalog& catalog);

const HardwareSpec* find_device(const Catalog& catalog, std::string_view name);

struct DeviceFilter {
  std::set<DeviceClass> classes;  // empty = any
  std::optional<double> min_bandwidth_gbps;
  std::optional<double> max_tdp_watts;
  std::optional<double> max_price_usd;
};

// Matching entries, stably ordered by (class, name).
Catalog filter_devices(const Catalog& catalog, const DeviceFilter& filter);
Catalog filter_devices(const Catalog& catalog, const std::function<bool(const HardwareSpec&)>& predicate);

}  // namespace moecap

#include "moecap/hardware.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "moecap/error.hpp"

namespace moecap {
namespace {

const std::set<std::string> kDeviceKeys = {"name",      "device_class", "peak_bandwidth_gbps", "offload_bandwidth_gbps",
                                           "peak_flops", "tdp_watts",    "price_usd",           "memory_gb",
                                           "aggregate",  "source"};
const std::set<std::string> kMemoryTiers = {"HBM", "DRAM", "SSD"};

double non_negative_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + "." + key, "missing required field");
  if (!it->is_number()) throw ValidationError(where + "." + key, "must be a number");
  const double v = it->get<double>();
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(where + "." + key, "must be finite and >= 0");
  return v;
}

}  // namespace

std::string_view to_string(DeviceClass c) {
  switch (c) {
    case DeviceClass::edge: return "edge";
    case DeviceClass::low_power: return "low_power";
    case DeviceClass::workstation: return "workstation";
    case DeviceClass::datacenter: return "datacenter";
  }
  return "unknown";
}

DeviceClass parse_device_class(std::string_view text) {
  if (text == "edge") return DeviceClass::edge;
  if (text == "low_power") return DeviceClass::low_power;
  if (text == "workstation") return DeviceClass::workstation;
  if (text == "datacenter") return DeviceClass::datacenter;
  throw ValidationError("device_class", "unknown device class '" + std::string(text) + "'");
}

double HardwareSpec::effective_bandwidth_gbps(bool use_offload) const {
  return use_offload && offload_bandwidth_gbps ? *offload_bandwidth_gbps : peak_bandwidth_gbps;
}

std::optional<double> HardwareSpec::flops(const std::string& precision) const {
  auto it = peak_flops.find(precision);
  if (it == peak_flops.end()) return std::nullopt;
  return it->second;
}

void validate(const HardwareSpec& s) {
  const std::string where = s.name.empty() ? "device" : s.name;
  if (s.name.empty()) throw ValidationError("name", "device name must be non-empty");
  auto check = [&](double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(where + "." + field, "must be finite and >= 0");
  };
  check(s.peak_bandwidth_gbps, "peak_bandwidth_gbps");
  check(s.tdp_watts, "tdp_watts");
  check(s.price_usd, "price_usd");
  for (const auto& [_, f] : s.peak_flops) check(f, "peak_flops");
  for (const auto& [tier, gb] : s.memory_gb) {
    if (!kMemoryTiers.contains(tier)) throw ValidationError(where + ".memory_gb", "unknown tier '" + tier + "'");
    check(gb, "memory_gb");
  }
  if (s.offload_bandwidth_gbps) {
    check(*s.offload_bandwidth_gbps, "offload_bandwidth_gbps");
    if (*s.offload_bandwidth_gbps > s.peak_bandwidth_gbps)
      throw ValidationError(where + ".offload_bandwidth_gbps", "exceeds peak_bandwidth_gbps");
  }
}

Catalog catalog_from_json(const nlohmann::json& doc) {
  const nlohmann::json* devices = &doc;
  if (doc.is_object()) {
    for (const auto& [k, _] : doc.items()) {
      if (k != "devices" && k != "notes") throw ValidationError(k, "unknown key");
    }
    if (!doc.contains("devices")) throw ValidationError("devices", "missing required field");
    devices = &doc["devices"];
  }
  if (!devices->is_array()) throw ValidationError("devices", "must be an array");

  Catalog out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < devices->size(); ++i) {
    const auto& d = (*devices)[i];
    const std::string where = "devices[" + std::to_string(i) + "]";
    if (!d.is_object()) throw ValidationError(where, "must be an object");
    for (const auto& [k, _] : d.items()) {
      if (!kDeviceKeys.contains(k)) throw ValidationError(where + "." + k, "unknown key");
    }
    HardwareSpec s;
    if (!d.contains("name") || !d["name"].is_string()) throw ValidationError(where + ".name", "missing device name");
    s.name = d["name"].get<std::string>();
    if (!d.contains("device_class") || !d["device_class"].is_string())
      throw ValidationError(s.name + ".device_class", "missing required field");
    s.device_class = parse_device_class(d["device_class"].get<std::string>());
    s.peak_bandwidth_gbps = non_negative_number(d, "peak_bandwidth_gbps", s.name);
    if (d.contains("offload_bandwidth_gbps"))
      s.offload_bandwidth_gbps = non_negative_number(d, "offload_bandwidth_gbps", s.name);
    s.tdp_watts = non_negative_number(d, "tdp_watts", s.name);
    s.price_usd = non_negative_number(d, "price_usd", s.name);
    if (d.contains("peak_flops")) {
      if (!d["peak_flops"].is_object()) throw ValidationError(s.name + ".peak_flops", "must be an object");
      for (const auto& [k, _] : d["peak_flops"].items()) s.peak_flops[k] = non_negative_number(d["peak_flops"], k, s.name + ".peak_flops");
    }
    if (d.contains("memory_gb")) {
      if (!d["memory_gb"].is_object()) throw ValidationError(s.name + ".memory_gb", "must be an object");
      for (const auto& [k, _] : d["memory_gb"].items()) s.memory_gb[k] = non_negative_number(d["memory_gb"], k, s.name + ".memory_gb");
    }
    if (d.contains("aggregate")) {
      if (!d["aggregate"].is_boolean()) throw ValidationError(s.name + ".aggregate", "must be a boolean");
      s.aggregate = d["aggregate"].get<bool>();
    }
    if (d.contains("source")) {
      if (!d["source"].is_string()) throw ValidationError(s.name + ".source", "must be a string");
      s.source = d["source"].get<std::string>();
    }
    validate(s);
    if (!names.insert(s.name).second) throw ValidationError(s.name, "duplicate device name");
    out.push_back(std::move(s));
  }
  return out;
}

Catalog load_catalog(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("catalog", std::string("malformed catalog: ") + e.what());
  }
  return catalog_from_json(doc);
}

Catalog load_catalog_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("catalog", "cannot open " + path.string());
  return load_catalog(in);
}

nlohmann::json to_json(const HardwareSpec& s) {
  nlohmann::json d = {{"name", s.name},
                      {"device_class", std::string(to_string(s.device_class))},
                      {"peak_bandwidth_gbps", s.peak_bandwidth_gbps}};
  if (s.offload_bandwidth_gbps) d["offload_bandwidth_gbps"] = *s.offload_bandwidth_gbps;
  d["peak_flops"] = s.peak_flops;
  d["tdp_watts"] = s.tdp_watts;
  d["price_usd"] = s.price_usd;
  d["memory_gb"] = s.memory_gb;
  if (s.aggregate) d["aggregate"] = true;
  if (!s.source.empty()) d["source"] = s.source;
  return d;
}

nlohmann::json to_json(const Catalog& catalog) {
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& s : catalog) devices.push_back(to_json(s));
  return {{"devices", devices}};
}

const HardwareSpec* find_device(const Catalog& catalog, std::string_view name) {
  auto it = std::find_if(catalog.begin(), catalog.end(), [&](const HardwareSpec& s) { return s.name == name; });
  return it == catalog.end() ? nullptr : &*it;
}

Catalog filter_devices(const Catalog& catalog, const std::function<bool(const HardwareSpec&)>& predicate) {
  Catalog out;
  std::copy_if(catalog.begin(), catalog.end(), std::back_inserter(out), predicate);
  std::stable_sort(out.begin(), out.end(), [](const HardwareSpec& a, const HardwareSpec& b) {
    if (a.device_class != b.device_class) return a.device_class < b.device_class;
    return a.name < b.name;
  });
  return out;
}

Catalog filter_devices(const Catalog& catalog, const DeviceFilter& f) {
  return filter_devices(catalog, [&](const HardwareSpec& s) {
    if (!f.classes.empty() && !f.classes.contains(s.device_class)) return false;
    if (f.min_bandwidth_gbps && s.peak_bandwidth_gbps < *f.min_bandwidth_gbps) return false;
    if (f.max_tdp_watts && s.tdp_watts > *f.max_tdp_watts) return false;
    if (f.max_price_usd && s.price_usd > *f.max_price_usd) return false;
    return true;
  });
}

}  // namespace moecap

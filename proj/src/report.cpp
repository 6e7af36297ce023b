#include "moecap/report.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "moecap/error.hpp"

namespace moecap {
namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void InputDigest::add_file(std::string role, const std::filesystem::path& path) {
  add_bytes(std::move(role), read_file_bytes(path));
}

void InputDigest::add_bytes(std::string role, std::string_view bytes) {
  entries_.emplace_back(std::move(role), sha256_hex(bytes));
}

std::string InputDigest::combined() const {
  std::string lines;
  for (const auto& [role, h] : entries_) lines += role + ":" + h + "\n";
  return sha256_hex(lines);
}

nlohmann::json InputDigest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [role, h] : entries_) files.push_back({{"role", role}, {"sha256", h}});
  return {{"sha256", combined()}, {"files", files}};
}

nlohmann::json to_json(const PassMetrics& m) {
  return {{"pass_id", m.pass_id},
          {"phase", std::string(to_string(m.phase))},
          {"batch_size", m.batch_size},
          {"tokens_processed", m.tokens_processed},
          {"latency_s", m.latency_s},
          {"activated_bytes", m.activated_bytes},
          {"model_bytes", m.model_bytes},
          {"kv_bytes", m.kv_bytes},
          {"achieved_bandwidth_bytes_per_s", m.achieved_bandwidth},
          {"s_mbu", m.s_mbu},
          {"mbu", m.vanilla_mbu},
          {"s_mfu", m.s_mfu},
          {"mfu", m.vanilla_mfu},
          {"tpot_s", optional_json(m.tpot_s)},
          {"token_throughput", m.token_throughput},
          {"overestimation_mbu", m.overestimation_mbu},
          {"overestimation_mfu", m.overestimation_mfu}};
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json passes = nlohmann::json::array();
  for (const auto& p : r.passes) passes.push_back(to_json(p));
  auto agg = to_json(r.aggregate);
  agg.erase("pass_id");
  agg.erase("phase");
  return {{"model", r.model_name},
          {"heterogeneous_experts", r.heterogeneous_experts},
          {"warnings", r.warnings},
          {"aggregate", agg},
          {"passes", passes}};
}

void write_metrics_csv(std::ostream& out, const MetricReport& r, const std::string& digest) {
  out << "# input_digest: sha256:" << digest << "\n";
  out << "pass_id,phase,batch_size,tokens_processed,latency_s,activated_bytes,kv_bytes,s_mbu,mbu,s_mfu,mfu,"
         "overestimation_mbu,overestimation_mfu\n";
  for (const auto& p : r.passes) {
    out << p.pass_id << ',' << to_string(p.phase) << ',' << p.batch_size << ',' << p.tokens_processed << ','
        << num(p.latency_s) << ',' << num(p.activated_bytes) << ',' << num(p.kv_bytes) << ',' << num(p.s_mbu) << ','
        << num(p.vanilla_mbu) << ',' << num(p.s_mfu) << ',' << num(p.vanilla_mfu) << ','
        << num(p.overestimation_mbu) << ',' << num(p.overestimation_mfu) << '\n';
  }
}

nlohmann::json to_json(const DeploymentRequirement& r) {
  return {{"activation_mode", r.activation_mode},
          {"activated_bytes", r.activated_bytes},
          {"kv_bytes", r.kv_bytes},
          {"efficiency_mbu", r.efficiency_mbu},
          {"efficiency_mfu", r.efficiency_mfu},
          {"theoretical_bandwidth_gbps", r.theoretical_bandwidth_gbps},
          {"practical_bandwidth_gbps", r.practical_bandwidth_gbps},
          {"theoretical_ops", optional_json(r.theoretical_ops)},
          {"practical_ops", optional_json(r.practical_ops)}};
}

nlohmann::json to_json(const DeviceVerdict& v) {
  return {{"device", v.device},
          {"device_class", std::string(to_string(v.device_class))},
          {"tdp_watts", v.tdp_watts},
          {"price_usd", v.price_usd},
          {"available_bandwidth_gbps", v.available_bandwidth_gbps},
          {"available_ops", optional_json(v.available_ops)},
          {"bandwidth_ok", v.bandwidth_ok},
          {"ops_ok", v.ops_ok},
          {"satisfied", v.satisfied}};
}

nlohmann::json to_json(const SweepPoint& p) {
  return {{"batch", p.batch},
          {"activated_fraction", p.activated_fraction},
          {"theoretical_bandwidth_gbps", p.theoretical_bandwidth_gbps},
          {"practical_bandwidth_gbps", p.practical_bandwidth_gbps},
          {"feasible_devices", p.feasible_devices}};
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep, const std::string& digest) {
  out << "# input_digest: sha256:" << digest << "\n";
  out << "batch,fraction,theoretical_gbps,practical_gbps,feasible_devices\n";
  for (const auto& p : sweep) {
    std::string devices;
    for (std::size_t i = 0; i < p.feasible_devices.size(); ++i) {
      if (i) devices += ';';
      devices += p.feasible_devices[i];
    }
    out << p.batch << ',' << num(p.activated_fraction) << ',' << num(p.theoretical_bandwidth_gbps) << ','
        << num(p.practical_bandwidth_gbps) << ',' << csv_field(devices) << '\n';
  }
}

void write_json(std::ostream& out, const nlohmann::json& doc) { out << doc.dump(2) << '\n'; }

}  // namespace moecap

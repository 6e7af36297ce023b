#include "moecap/costing.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "moecap/error.hpp"

namespace moecap {
namespace {

void non_negative(double v, const std::string& field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be finite and >= 0");
}

void positive(double v, const std::string& field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be finite and > 0");
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where, "must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (!keys.contains(k)) throw ValidationError(where + "." + k, "unknown key");
  }
}

double number(const nlohmann::json& obj, const char* key, const std::string& where, bool required = true) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ValidationError(where + "." + key, "missing required field");
    return 0.0;
  }
  if (!it->is_number()) throw ValidationError(where + "." + key, "must be a number");
  return it->get<double>();
}

std::optional<double> optional_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  return number(obj, key, where);
}

}  // namespace

void validate(const BillOfMaterials& bom) {
  non_negative(bom.gpu, "bom.gpu");
  non_negative(bom.cpu, "bom.cpu");
  non_negative(bom.motherboard, "bom.motherboard");
  non_negative(bom.dram, "bom.dram");
  non_negative(bom.ssd, "bom.ssd");
  double within_gpu = 0.0;
  for (auto [v, name] : {std::pair{bom.hbm, "bom.hbm"}, std::pair{bom.nvlink, "bom.nvlink"},
                         std::pair{bom.c2m, "bom.c2m"}}) {
    if (v) {
      non_negative(*v, name);
      within_gpu += *v;
    }
  }
  if (within_gpu > bom.gpu)
    throw ValidationError("bom.gpu", "HBM + NVLink + C2M annotations exceed the GPU line item");
  if (bom.pcie) {
    non_negative(*bom.pcie, "bom.pcie");
    if (*bom.pcie > bom.motherboard) throw ValidationError("bom.pcie", "exceeds the motherboard line item");
  }
}

void validate(const PowerProfile& p) {
  non_negative(p.gpu, "power.gpu");
  non_negative(p.cpu, "power.cpu");
  non_negative(p.c2m, "power.c2m");
  non_negative(p.pcie, "power.pcie");
  non_negative(p.nvlink, "power.nvlink");
}

void validate(const DeploymentEconomics& e) {
  positive(e.runtime_hours, "economics.runtime_hours");
  positive(e.energy_price_per_kwh, "economics.energy_price_per_kwh");
  positive(e.token_throughput, "economics.token_throughput");
}

double purchase_cost(const BillOfMaterials& bom) {
  validate(bom);
  return bom.gpu + bom.cpu + bom.motherboard + bom.dram + bom.ssd;
}

double energy_cost_kwh(const PowerProfile& power, double runtime_hours) {
  validate(power);
  non_negative(runtime_hours, "runtime_hours");
  return power.total_watts() / 1000.0 * runtime_hours;
}

double cost_per_token(const BillOfMaterials& bom, const PowerProfile& power, const DeploymentEconomics& econ) {
  positive(econ.runtime_hours, "economics.runtime_hours");
  positive(econ.token_throughput, "economics.token_throughput");
  non_negative(econ.energy_price_per_kwh, "economics.energy_price_per_kwh");
  const double hardware = purchase_cost(bom);
  const double energy = energy_cost_kwh(power, econ.runtime_hours) * econ.energy_price_per_kwh;
  const double tokens = econ.token_throughput * econ.runtime_hours * kSecondsPerHour;
  return (hardware + energy) / tokens;
}

PowerProfile power_from_tdp(double gpu_tdp_watts, double cpu_tdp_watts, double utilization) {
  non_negative(gpu_tdp_watts, "gpu_tdp_watts");
  non_negative(cpu_tdp_watts, "cpu_tdp_watts");
  if (!(utilization > 0.0 && utilization <= 1.0)) throw ValidationError("utilization", "must be in (0, 1]");
  PowerProfile p;
  p.gpu = gpu_tdp_watts * utilization;
  p.cpu = cpu_tdp_watts * utilization;
  return p;
}

CostBreakdown cost_breakdown(const CostInputs& in) {
  CostBreakdown b;
  b.hardware_usd = purchase_cost(in.bom);
  b.power_watts = in.power.total_watts();
  b.energy_kwh = energy_cost_kwh(in.power, in.economics.runtime_hours);
  b.energy_usd = b.energy_kwh * in.economics.energy_price_per_kwh;
  b.total_usd = b.hardware_usd + b.energy_usd;
  b.tokens = in.economics.token_throughput * in.economics.runtime_hours * kSecondsPerHour;
  b.cost_per_token = cost_per_token(in.bom, in.power, in.economics);
  return b;
}

CostInputs cost_inputs_from_json(const nlohmann::json& doc) {
  reject_unknown(doc, {"bom", "power", "economics", "notes"}, "cost");
  if (!doc.contains("bom")) throw ValidationError("bom", "missing required section");
  if (!doc.contains("economics")) throw ValidationError("economics", "missing required section");

  CostInputs in;
  const auto& bom = doc["bom"];
  reject_unknown(bom, {"gpu", "cpu", "motherboard", "dram", "ssd", "hbm", "nvlink", "c2m", "pcie"}, "bom");
  in.bom.gpu = number(bom, "gpu", "bom");
  in.bom.cpu = number(bom, "cpu", "bom");
  in.bom.motherboard = number(bom, "motherboard", "bom");
  in.bom.dram = number(bom, "dram", "bom");
  in.bom.ssd = number(bom, "ssd", "bom");
  in.bom.hbm = optional_number(bom, "hbm", "bom");
  in.bom.nvlink = optional_number(bom, "nvlink", "bom");
  in.bom.c2m = optional_number(bom, "c2m", "bom");
  in.bom.pcie = optional_number(bom, "pcie", "bom");
  validate(in.bom);

  const auto& econ = doc["economics"];
  reject_unknown(econ, {"runtime_hours", "energy_price_per_kwh", "token_throughput"}, "economics");
  in.economics.runtime_hours = number(econ, "runtime_hours", "economics");
  in.economics.energy_price_per_kwh = number(econ, "energy_price_per_kwh", "economics");
  in.economics.token_throughput = number(econ, "token_throughput", "economics");
  validate(in.economics);

  if (doc.contains("power")) {
    const auto& p = doc["power"];
    reject_unknown(p, {"gpu", "cpu", "c2m", "pcie", "nvlink", "gpu_tdp", "cpu_tdp", "utilization"}, "power");
    if (p.contains("gpu_tdp") || p.contains("cpu_tdp")) {
      const double util = p.contains("utilization") ? number(p, "utilization", "power") : kDefaultTdpUtilization;
      in.power = power_from_tdp(number(p, "gpu_tdp", "power", false), number(p, "cpu_tdp", "power", false), util);
      in.power.c2m = number(p, "c2m", "power", false);
      in.power.pcie = number(p, "pcie", "power", false);
      in.power.nvlink = number(p, "nvlink", "power", false);
    } else {
      in.power.gpu = number(p, "gpu", "power", false);
      in.power.cpu = number(p, "cpu", "power", false);
      in.power.c2m = number(p, "c2m", "power", false);
      in.power.pcie = number(p, "pcie", "power", false);
      in.power.nvlink = number(p, "nvlink", "power", false);
    }
    validate(in.power);
  }
  return in;
}

CostInputs load_cost_inputs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cost", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("cost", std::string("malformed cost inputs: ") + e.what());
  }
  return cost_inputs_from_json(doc);
}

nlohmann::json to_json(const CostInputs& in) {
  nlohmann::json bom = {{"gpu", in.bom.gpu},
                        {"cpu", in.bom.cpu},
                        {"motherboard", in.bom.motherboard},
                        {"dram", in.bom.dram},
                        {"ssd", in.bom.ssd}};
  if (in.bom.hbm) bom["hbm"] = *in.bom.hbm;
  if (in.bom.nvlink) bom["nvlink"] = *in.bom.nvlink;
  if (in.bom.c2m) bom["c2m"] = *in.bom.c2m;
  if (in.bom.pcie) bom["pcie"] = *in.bom.pcie;
  return {{"bom", bom},
          {"power",
           {{"gpu", in.power.gpu},
            {"cpu", in.power.cpu},
            {"c2m", in.power.c2m},
            {"pcie", in.power.pcie},
            {"nvlink", in.power.nvlink}}},
          {"economics",
           {{"runtime_hours", in.economics.runtime_hours},
            {"energy_price_per_kwh", in.economics.energy_price_per_kwh},
            {"token_throughput", in.economics.token_throughput}}}};
}

nlohmann::json to_json(const CostBreakdown& b) {
  return {{"hardware_usd", b.hardware_usd}, {"power_watts", b.power_watts}, {"energy_kwh", b.energy_kwh},
          {"energy_usd", b.energy_usd},     {"total_usd", b.total_usd},     {"tokens", b.tokens},
          {"cost_per_token_usd", b.cost_per_token}};
}

}  // namespace moecap

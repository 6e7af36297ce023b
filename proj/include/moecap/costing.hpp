#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "json.hpp"

namespace moecap {

// Purchasable line items in dollars. The decomposition terms (HBM, NVLink,
// chip-to-memory, PCIe) are annotations: they are priced inside their
// enclosing parts and never added to the total.
struct BillOfMaterials {
  double gpu = 0.0;
  double cpu = 0.0;
  double motherboard = 0.0;
  double dram = 0.0;
  double ssd = 0.0;

  std::optional<double> hbm;     // within gpu
  std::optional<double> nvlink;  // within gpu
  std::optional<double> c2m;     // within gpu, capped by the cpu choice
  std::optional<double> pcie;    // within motherboard
};

// Average power draw in watts over the runtime.
struct PowerProfile {
  double gpu = 0.0;
  double cpu = 0.0;
  double c2m = 0.0;
  double pcie = 0.0;
  double nvlink = 0.0;

  double total_watts() const { return gpu + cpu + c2m + pcie + nvlink; }
};

struct DeploymentEconomics {
  double runtime_hours = 0.0;
  double energy_price_per_kwh = 0.0;
  double token_throughput = 0.0;  // tokens/s
};

inline constexpr double kSecondsPerHour = 3600.0;
inline constexpr double kDefaultTdpUtilization = 0.6;

void validate(const BillOfMaterials& bom);
void validate(const PowerProfile& power);
void validate(const DeploymentEconomics& econ);

// C_GPU + C_CPU + C_Motherboard + C_DRAM + C_SSD.
double purchase_cost(const BillOfMaterials& bom);
// Sum of average draws (W) / 1000 x runtime hours.
double energy_cost_kwh(const PowerProfile& power, double runtime_hours);
// (C_hardware + kWh x price) / (T_token x runtime seconds). Runtime is stored
// in hours and converted here.
double cost_per_token(const BillOfMaterials& bom, const PowerProfile& power, const DeploymentEconomics& econ);

// Average-power default from catalog TDPs scaled by a utilization factor.
PowerProfile power_from_tdp(double gpu_tdp_watts, double cpu_tdp_watts,
                            double utilization = kDefaultTdpUtilization);

struct CostInputs {
  BillOfMaterials bom;
  PowerProfile power;
  DeploymentEconomics economics;
};

struct CostBreakdown {
  double hardware_usd = 0.0;
  double energy_kwh = 0.0;
  double energy_usd = 0.0;
  double total_usd = 0.0;
  double tokens = 0.0;
  double cost_per_token = 0.0;
  double power_watts = 0.0;
};

CostBreakdown cost_breakdown(const CostInputs& in);

CostInputs cost_inputs_from_json(const nlohmann::json& doc);
CostInputs load_cost_inputs_file(const std::filesystem::path& path);
nlohmann::json to_json(const CostInputs& in);
nlohmann::json to_json(const CostBreakdown& b);

}  // namespace moecap

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "moecap/hardware.hpp"
#include "moecap/model.hpp"
#include "moecap/routing.hpp"
#include "moecap/trace.hpp"

namespace moecap {

inline constexpr double kBytesPerGB = 1e9;

struct SloSpec {
  double tpot_s = 0.1;
};

// Which experts are assumed to be read per decode step.
struct Batch1Analytic {};
struct FullActivation {};
struct TraceActivation {
  const ActivationSheet* sheet = nullptr;  // mean activated bytes over passes
};
struct ExpectedActivation {
  std::uint64_t batch = 1;
  RoutingDistribution dist = RoutingDistribution::uniform();
};
using ActivationMode = std::variant<Batch1Analytic, FullActivation, TraceActivation, ExpectedActivation>;

std::string describe(const ActivationMode& mode);

struct DeploymentRequirement {
  double theoretical_bandwidth_gbps = 0.0;
  double practical_bandwidth_gbps = 0.0;
  std::optional<double> theoretical_ops;
  std::optional<double> practical_ops;
  std::string activation_mode;
  double efficiency_mbu = 1.0;
  double efficiency_mfu = 1.0;
  double activated_bytes = 0.0;
  double kv_bytes = 0.0;
};

// Weight bytes read per decode step under `mode`. Expected mode counts the
// expected distinct routed experts per MoE layer on top of the always-read
// parameters.
double activated_bytes_for_mode(const ModelDescriptor& desc, Precision prec, const ActivationMode& mode,
                                AccountingOptions opts = {});

// (S_activated(mode) + S_KV) / tpot, in GB/s.
double theoretical_bandwidth_gbps(const ModelDescriptor& desc, Precision prec, const SloSpec& slo,
                                  const ActivationMode& mode, double kv_bytes = 0.0, AccountingOptions opts = {});
// Theoretical / efficiency; efficiency in (0, 1].
double practical_bandwidth(double theoretical, double s_mbu_efficiency);
double practical_ops(double theoretical_ops, double s_mfu_efficiency);
// batch x S-F_token / tpot.
double theoretical_ops(const ModelDescriptor& desc, std::uint64_t seq_len, std::uint64_t batch, const SloSpec& slo);

struct RequirementOptions {
  double efficiency_mbu = 1.0;
  double efficiency_mfu = 1.0;
  double kv_bytes = 0.0;
  bool include_ops = false;
  std::uint64_t seq_len = 1;
  AccountingOptions accounting;
};

DeploymentRequirement plan_requirement(const ModelDescriptor& desc, Precision prec, const SloSpec& slo,
                                       const ActivationMode& mode, const RequirementOptions& opts = {});

struct DeviceVerdict {
  std::string device;
  DeviceClass device_class = DeviceClass::workstation;
  double tdp_watts = 0.0;
  double price_usd = 0.0;
  double available_bandwidth_gbps = 0.0;
  std::optional<double> available_ops;
  bool bandwidth_ok = false;
  bool ops_ok = true;
  bool satisfied = false;
};

// One verdict per device, sorted by TDP then price. When the requirement
// carries OPS, devices lacking a FLOPS entry for `flops_precision` fail it.
std::vector<DeviceVerdict> feasibility(const DeploymentRequirement& req, const Catalog& catalog, bool use_offload,
                                       const std::string& flops_precision = "fp16");

struct SweepPoint {
  std::uint64_t batch = 1;
  double activated_fraction = 0.0;
  double theoretical_bandwidth_gbps = 0.0;
  double practical_bandwidth_gbps = 0.0;
  std::vector<std::string> feasible_devices;
};

// Expected-mode requirement and feasibility per batch size. `batches` must be
// ascending.
std::vector<SweepPoint> batch_sweep(const ModelDescriptor& desc, const RoutingDistribution& dist,
                                    const std::vector<std::uint64_t>& batches, const SloSpec& slo, Precision prec,
                                    double efficiency, const Catalog& catalog, bool use_offload = false,
                                    AccountingOptions opts = {});

// Inferred defaults that reproduce the bandwidth-vs-power requirement lines:
// 8-bit weights, one efficiency divisor, 0.1 s/token.
struct BandwidthMapAssumptions {
  Precision precision = Precision::int8();
  double efficiency = 0.3558;
  SloSpec slo{0.1};
};

// Plot data: device points (TDP, peak and offload bandwidth) and per-model
// batch-1 and full-activation requirement lines.
nlohmann::json bandwidth_map_plot_data(const std::vector<ModelDescriptor>& models, const Catalog& catalog,
                              const BandwidthMapAssumptions& assumptions = {}, AccountingOptions opts = {});

}  // namespace moecap

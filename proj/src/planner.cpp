#include "moecap/planner.hpp"

#include <algorithm>
#include <cmath>

#include "moecap/error.hpp"
#include "moecap/metrics.hpp"

namespace moecap {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_efficiency(double eta, const char* field) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError(field, "efficiency must be in (0, 1]");
}

void check_slo(const SloSpec& slo) {
  if (!(slo.tpot_s > 0.0) || !std::isfinite(slo.tpot_s)) throw ValidationError("slo", "tpot_s must be > 0");
}

}  // namespace

std::string describe(const ActivationMode& mode) {
  return std::visit(overloaded{[](const Batch1Analytic&) { return std::string("batch1_analytic"); },
                               [](const FullActivation&) { return std::string("full_activation"); },
                               [](const TraceActivation&) { return std::string("trace"); },
                               [](const ExpectedActivation& e) {
                                 return "expected(batch=" + std::to_string(e.batch) + "," + e.dist.describe() + ")";
                               }},
                    mode);
}

double activated_bytes_for_mode(const ModelDescriptor& desc, Precision prec, const ActivationMode& mode,
                                AccountingOptions opts) {
  return std::visit(
      overloaded{
          [&](const Batch1Analytic&) { return active_param_bytes_analytic(desc, prec, opts); },
          [&](const FullActivation&) { return total_param_bytes(desc, prec, opts); },
          [&](const TraceActivation& t) {
            if (t.sheet == nullptr) throw ValidationError("trace", "trace mode requires an activation sheet");
            validate(*t.sheet, desc);
            double sum = 0.0;
            for (const auto& p : t.sheet->passes) sum += prec.bytes(activated_params(p, desc, opts));
            return sum / static_cast<double>(t.sheet->passes.size());
          },
          [&](const ExpectedActivation& e) {
            const auto distinct = expected_distinct_experts(desc.n_expert, desc.top_k, e.batch, e.dist).mean;
            const double routed = distinct * desc.moe_layer_count() * static_cast<double>(desc.params_expert);
            return prec.bytes(always_active_params(desc, opts)) + routed * prec.bytes_per_param();
          }},
      mode);
}

double theoretical_bandwidth_gbps(const ModelDescriptor& desc, Precision prec, const SloSpec& slo,
                                  const ActivationMode& mode, double kv_bytes, AccountingOptions opts) {
  check_slo(slo);
  if (kv_bytes < 0.0) throw ValidationError("kv_bytes", "must be >= 0");
  return (activated_bytes_for_mode(desc, prec, mode, opts) + kv_bytes) / slo.tpot_s / kBytesPerGB;
}

double practical_bandwidth(double theoretical, double s_mbu_efficiency) {
  check_efficiency(s_mbu_efficiency, "efficiency_mbu");
  return theoretical / s_mbu_efficiency;
}

double practical_ops(double theoretical_ops, double s_mfu_efficiency) {
  check_efficiency(s_mfu_efficiency, "efficiency_mfu");
  return theoretical_ops / s_mfu_efficiency;
}

double theoretical_ops(const ModelDescriptor& desc, std::uint64_t seq_len, std::uint64_t batch, const SloSpec& slo) {
  check_slo(slo);
  if (batch < 1) throw ValidationError("batch", "must be >= 1");
  return static_cast<double>(batch) * sparse_flops_per_token(desc, seq_len) / slo.tpot_s;
}

DeploymentRequirement plan_requirement(const ModelDescriptor& desc, Precision prec, const SloSpec& slo,
                                       const ActivationMode& mode, const RequirementOptions& opts) {
  DeploymentRequirement r;
  r.activation_mode = describe(mode);
  r.efficiency_mbu = opts.efficiency_mbu;
  r.efficiency_mfu = opts.efficiency_mfu;
  r.activated_bytes = activated_bytes_for_mode(desc, prec, mode, opts.accounting);
  r.kv_bytes = opts.kv_bytes;
  r.theoretical_bandwidth_gbps = theoretical_bandwidth_gbps(desc, prec, slo, mode, opts.kv_bytes, opts.accounting);
  r.practical_bandwidth_gbps = practical_bandwidth(r.theoretical_bandwidth_gbps, opts.efficiency_mbu);
  if (opts.include_ops) {
    std::uint64_t batch = 1;
    if (const auto* e = std::get_if<ExpectedActivation>(&mode)) batch = e->batch;
    r.theoretical_ops = theoretical_ops(desc, opts.seq_len, batch, slo);
    r.practical_ops = practical_ops(*r.theoretical_ops, opts.efficiency_mfu);
  } else {
    check_efficiency(opts.efficiency_mfu, "efficiency_mfu");
  }
  return r;
}

std::vector<DeviceVerdict> feasibility(const DeploymentRequirement& req, const Catalog& catalog, bool use_offload,
                                       const std::string& flops_precision) {
  std::vector<DeviceVerdict> out;
  out.reserve(catalog.size());
  for (const auto& dev : catalog) {
    DeviceVerdict v;
    v.device = dev.name;
    v.device_class = dev.device_class;
    v.tdp_watts = dev.tdp_watts;
    v.price_usd = dev.price_usd;
    v.available_bandwidth_gbps = dev.effective_bandwidth_gbps(use_offload);
    v.bandwidth_ok = v.available_bandwidth_gbps >= req.practical_bandwidth_gbps;
    if (req.practical_ops) {
      v.available_ops = dev.flops(flops_precision);
      v.ops_ok = v.available_ops && *v.available_ops >= *req.practical_ops;
    }
    v.satisfied = v.bandwidth_ok && v.ops_ok;
    out.push_back(std::move(v));
  }
  std::stable_sort(out.begin(), out.end(), [](const DeviceVerdict& a, const DeviceVerdict& b) {
    if (a.tdp_watts != b.tdp_watts) return a.tdp_watts < b.tdp_watts;
    return a.price_usd < b.price_usd;
  });
  return out;
}

std::vector<SweepPoint> batch_sweep(const ModelDescriptor& desc, const RoutingDistribution& dist,
                                    const std::vector<std::uint64_t>& batches, const SloSpec& slo, Precision prec,
                                    double efficiency, const Catalog& catalog, bool use_offload,
                                    AccountingOptions opts) {
  if (!std::is_sorted(batches.begin(), batches.end())) throw ValidationError("batches", "must be ascending");
  const double total = total_param_bytes(desc, prec, opts);

  std::vector<SweepPoint> out;
  for (auto b : batches) {
    SweepPoint pt;
    pt.batch = b;
    RequirementOptions ro;
    ro.efficiency_mbu = efficiency;
    ro.accounting = opts;
    const auto req = plan_requirement(desc, prec, slo, ExpectedActivation{b, dist}, ro);
    pt.activated_fraction = total > 0 ? req.activated_bytes / total : 0.0;
    pt.theoretical_bandwidth_gbps = req.theoretical_bandwidth_gbps;
    pt.practical_bandwidth_gbps = req.practical_bandwidth_gbps;
    for (const auto& v : feasibility(req, catalog, use_offload)) {
      if (v.satisfied) pt.feasible_devices.push_back(v.device);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

nlohmann::json bandwidth_map_plot_data(const std::vector<ModelDescriptor>& models, const Catalog& catalog,
                              const BandwidthMapAssumptions& a, AccountingOptions opts) {
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& d : filter_devices(catalog, DeviceFilter{})) {
    nlohmann::json p = {{"name", d.name},
                        {"device_class", std::string(to_string(d.device_class))},
                        {"tdp_watts", d.tdp_watts},
                        {"peak_bandwidth_gbps", d.peak_bandwidth_gbps},
                        {"aggregate", d.aggregate}};
    p["offload_bandwidth_gbps"] = d.offload_bandwidth_gbps ? nlohmann::json(*d.offload_bandwidth_gbps) : nlohmann::json();
    devices.push_back(std::move(p));
  }

  nlohmann::json lines = nlohmann::json::array();
  for (const auto& m : models) {
    RequirementOptions ro;
    ro.efficiency_mbu = a.efficiency;
    ro.accounting = opts;
    const auto batch1 = plan_requirement(m, a.precision, a.slo, Batch1Analytic{}, ro);
    const auto full = plan_requirement(m, a.precision, a.slo, FullActivation{}, ro);
    lines.push_back({{"model", m.name},
                     {"batch1_practical_gbps", batch1.practical_bandwidth_gbps},
                     {"full_activation_practical_gbps", full.practical_bandwidth_gbps},
                     {"batch1_theoretical_gbps", batch1.theoretical_bandwidth_gbps},
                     {"full_activation_theoretical_gbps", full.theoretical_bandwidth_gbps}});
  }

  return {{"assumptions",
           {{"bytes_per_param", a.precision.bytes_per_param()},
            {"efficiency", a.efficiency},
            {"tpot_s", a.slo.tpot_s},
            {"include_embeddings", opts.include_embeddings},
            {"inferred", true}}},
          {"devices", devices},
          {"requirement_lines", lines}};
}

}  // namespace moecap

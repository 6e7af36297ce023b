#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moecap/model.hpp"
#include "moecap/trace.hpp"

namespace moecap {

// Peak capabilities the utilization metrics divide by. SI units: bytes/s and
// FLOP/s.
struct HardwarePeaks {
  double bandwidth_bytes_per_s = 0.0;
  double flops_per_s = 0.0;
};

struct MetricOptions {
  AccountingOptions accounting;
  // Context length for attention FLOPs.
  std::uint64_t seq_len = 1;
  // When set, passes with kv_bytes_read == 0 use the KV-cache formula at this
  // context length; otherwise their KV traffic counts as zero.
  std::optional<std::uint64_t> kv_context_len;
};

// Bytes moved and wall time of one pass.
struct PassTraffic {
  double bytes = 0.0;
  double seconds = 0.0;
};

// (S_model + S_KV) / TPOT / B_peak; full model regardless of routing.
double vanilla_mbu(const ModelDescriptor& desc, Precision prec, double peak_bandwidth_bytes_per_s, double tpot_s,
                   double kv_bytes, AccountingOptions opts = {});

// KV bytes of a pass per MetricOptions.
double pass_kv_bytes(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                     const MetricOptions& opts);
// S_activated + S_KV for the pass, and its latency.
PassTraffic pass_traffic(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                         const MetricOptions& opts = {});

// (S_activated + S_KV) / latency / B_peak for one pass.
double s_mbu_per_pass(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                      double peak_bandwidth_bytes_per_s, const MetricOptions& opts = {});

// Sum of bytes over sum of time, over peak bandwidth. Not the mean of
// per-pass ratios.
double aggregate_utilization(std::span<const PassTraffic> passes, double peak_bandwidth_bytes_per_s);

double s_mbu_aggregate(const ActivationSheet& sheet, const ModelDescriptor& desc, Precision prec,
                       double peak_bandwidth_bytes_per_s, const MetricOptions& opts = {});

// T_token x S-F_token / F_peak. Needs no trace.
double s_mfu(double throughput_tokens_per_s, const ModelDescriptor& desc, std::uint64_t seq_len,
             double peak_flops_per_s);
// Same with every routed expert participating.
double vanilla_mfu(double throughput_tokens_per_s, const ModelDescriptor& desc, std::uint64_t seq_len,
                   double peak_flops_per_s);

// vanilla / sparse.
double overestimation(double vanilla, double sparse);

struct PassMetrics {
  std::uint64_t pass_id = 0;
  Phase phase = Phase::decode;
  std::uint64_t batch_size = 0;
  std::uint64_t tokens_processed = 0;
  double latency_s = 0.0;
  double activated_bytes = 0.0;
  double model_bytes = 0.0;
  double kv_bytes = 0.0;
  double achieved_bandwidth = 0.0;  // bytes/s
  double s_mbu = 0.0;
  double vanilla_mbu = 0.0;
  double s_mfu = 0.0;
  double vanilla_mfu = 0.0;
  std::optional<double> tpot_s;  // decode passes only
  double token_throughput = 0.0;
  double overestimation_mbu = 0.0;
  double overestimation_mfu = 0.0;
};

struct MetricReport {
  std::string model_name;
  std::vector<PassMetrics> passes;
  PassMetrics aggregate;  // pass_id unused; sums over all passes
  bool heterogeneous_experts = false;
  std::vector<std::string> warnings;
};

// Per-pass and aggregate metrics. Values above 1.0 are reported as is and
// noted in `warnings`.
MetricReport compute_metric_report(const ActivationSheet& sheet, const ModelDescriptor& desc, Precision prec,
                                   const HardwarePeaks& peaks, const MetricOptions& opts = {});

}  // namespace moecap

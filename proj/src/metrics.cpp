#include "moecap/metrics.hpp"

#include <cmath>
#include <sstream>

#include "moecap/error.hpp"

namespace moecap {
namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be positive and finite");
}

}  // namespace

double vanilla_mbu(const ModelDescriptor& desc, Precision prec, double peak_bandwidth_bytes_per_s, double tpot_s,
                   double kv_bytes, AccountingOptions opts) {
  require_positive(peak_bandwidth_bytes_per_s, "peak_bandwidth");
  require_positive(tpot_s, "tpot_s");
  if (kv_bytes < 0.0) throw ValidationError("kv_bytes", "must be >= 0");
  return (total_param_bytes(desc, prec, opts) + kv_bytes) / tpot_s / peak_bandwidth_bytes_per_s;
}

double pass_kv_bytes(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                     const MetricOptions& opts) {
  if (pass.kv_bytes_read > 0) return static_cast<double>(pass.kv_bytes_read);
  if (opts.kv_context_len) return kv_cache_bytes(desc, *opts.kv_context_len, pass.batch_size, prec);
  return 0.0;
}

PassTraffic pass_traffic(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                         const MetricOptions& opts) {
  return {prec.bytes(activated_params(pass, desc, opts.accounting)) + pass_kv_bytes(pass, desc, prec, opts),
          pass.latency_s};
}

double s_mbu_per_pass(const ForwardPassRecord& pass, const ModelDescriptor& desc, Precision prec,
                      double peak_bandwidth_bytes_per_s, const MetricOptions& opts) {
  require_positive(peak_bandwidth_bytes_per_s, "peak_bandwidth");
  require_positive(pass.latency_s, "latency_s");
  const auto t = pass_traffic(pass, desc, prec, opts);
  return t.bytes / t.seconds / peak_bandwidth_bytes_per_s;
}

double aggregate_utilization(std::span<const PassTraffic> passes, double peak_bandwidth_bytes_per_s) {
  if (passes.empty()) throw ValidationError("sheet", "no passes to aggregate");
  require_positive(peak_bandwidth_bytes_per_s, "peak_bandwidth");
  double bytes = 0.0, seconds = 0.0;
  for (const auto& p : passes) {
    bytes += p.bytes;
    seconds += p.seconds;
  }
  require_positive(seconds, "latency_s");
  return bytes / seconds / peak_bandwidth_bytes_per_s;
}

double s_mbu_aggregate(const ActivationSheet& sheet, const ModelDescriptor& desc, Precision prec,
                       double peak_bandwidth_bytes_per_s, const MetricOptions& opts) {
  std::vector<PassTraffic> traffic;
  traffic.reserve(sheet.passes.size());
  for (const auto& p : sheet.passes) traffic.push_back(pass_traffic(p, desc, prec, opts));
  return aggregate_utilization(traffic, peak_bandwidth_bytes_per_s);
}

double s_mfu(double throughput_tokens_per_s, const ModelDescriptor& desc, std::uint64_t seq_len,
             double peak_flops_per_s) {
  require_positive(throughput_tokens_per_s, "throughput");
  require_positive(peak_flops_per_s, "peak_flops");
  return throughput_tokens_per_s * sparse_flops_per_token(desc, seq_len) / peak_flops_per_s;
}

double vanilla_mfu(double throughput_tokens_per_s, const ModelDescriptor& desc, std::uint64_t seq_len,
                   double peak_flops_per_s) {
  require_positive(throughput_tokens_per_s, "throughput");
  require_positive(peak_flops_per_s, "peak_flops");
  return throughput_tokens_per_s * dense_flops_per_token(desc, seq_len) / peak_flops_per_s;
}

double overestimation(double vanilla, double sparse) {
  if (!(sparse > 0.0)) throw ValidationError("sparse", "must be > 0");
  return vanilla / sparse;
}

MetricReport compute_metric_report(const ActivationSheet& sheet, const ModelDescriptor& desc, Precision prec,
                                   const HardwarePeaks& peaks, const MetricOptions& opts) {
  validate(sheet, desc);
  require_positive(peaks.bandwidth_bytes_per_s, "peak_bandwidth");
  require_positive(peaks.flops_per_s, "peak_flops");

  MetricReport report;
  report.model_name = desc.name;
  report.heterogeneous_experts = desc.has_heterogeneous_experts();
  if (report.heterogeneous_experts) {
    report.warnings.push_back("shared experts differ in size from routed experts; sizes accounted separately");
  }

  const double model_bytes = total_param_bytes(desc, prec, opts.accounting);
  const double sparse_flops = sparse_flops_per_token(desc, opts.seq_len);
  const double dense_flops = dense_flops_per_token(desc, opts.seq_len);

  double act_sum = 0.0, kv_sum = 0.0, time_sum = 0.0, decode_time = 0.0;
  std::uint64_t tokens_sum = 0, batch_sum = 0, decode_passes = 0;

  for (const auto& p : sheet.passes) {
    PassMetrics m;
    m.pass_id = p.pass_id;
    m.phase = p.phase;
    m.batch_size = p.batch_size;
    m.tokens_processed = p.tokens_processed;
    m.latency_s = p.latency_s;
    m.activated_bytes = prec.bytes(activated_params(p, desc, opts.accounting));
    m.model_bytes = model_bytes;
    m.kv_bytes = pass_kv_bytes(p, desc, prec, opts);
    m.achieved_bandwidth = (m.activated_bytes + m.kv_bytes) / p.latency_s;
    m.s_mbu = m.achieved_bandwidth / peaks.bandwidth_bytes_per_s;
    m.vanilla_mbu = (model_bytes + m.kv_bytes) / p.latency_s / peaks.bandwidth_bytes_per_s;
    m.token_throughput = static_cast<double>(p.tokens_processed) / p.latency_s;
    m.s_mfu = m.token_throughput * sparse_flops / peaks.flops_per_s;
    m.vanilla_mfu = m.token_throughput * dense_flops / peaks.flops_per_s;
    if (p.phase == Phase::decode) m.tpot_s = p.latency_s;
    // Same latency and peaks on both sides, so compare the numerators directly.
    m.overestimation_mbu = overestimation(model_bytes + m.kv_bytes, m.activated_bytes + m.kv_bytes);
    m.overestimation_mfu = overestimation(dense_flops, sparse_flops);

    if (m.s_mbu > 1.0 || m.vanilla_mbu > 1.0 || m.s_mfu > 1.0 || m.vanilla_mfu > 1.0) {
      std::ostringstream w;
      w << "pass " << p.pass_id << ": utilization above 1.0; check peak bandwidth/FLOPS and latency";
      report.warnings.push_back(w.str());
    }

    act_sum += m.activated_bytes;
    kv_sum += m.kv_bytes;
    time_sum += p.latency_s;
    tokens_sum += p.tokens_processed;
    batch_sum += p.batch_size;
    if (p.phase == Phase::decode) {
      decode_time += p.latency_s;
      ++decode_passes;
    }
    report.passes.push_back(std::move(m));
  }

  const double n = static_cast<double>(sheet.passes.size());
  PassMetrics& a = report.aggregate;
  a.batch_size = batch_sum;
  a.tokens_processed = tokens_sum;
  a.latency_s = time_sum;
  a.activated_bytes = act_sum / n;
  a.model_bytes = model_bytes;
  a.kv_bytes = kv_sum / n;
  a.achieved_bandwidth = (act_sum + kv_sum) / time_sum;
  a.s_mbu = a.achieved_bandwidth / peaks.bandwidth_bytes_per_s;
  a.vanilla_mbu = (model_bytes * n + kv_sum) / time_sum / peaks.bandwidth_bytes_per_s;
  a.token_throughput = static_cast<double>(tokens_sum) / time_sum;
  a.s_mfu = a.token_throughput * sparse_flops / peaks.flops_per_s;
  a.vanilla_mfu = a.token_throughput * dense_flops / peaks.flops_per_s;
  if (decode_passes > 0) a.tpot_s = decode_time / static_cast<double>(decode_passes);
  a.overestimation_mbu = overestimation(model_bytes * n + kv_sum, act_sum + kv_sum);
  a.overestimation_mfu = overestimation(dense_flops, sparse_flops);
  return report;
}

}  // namespace moecap

#include "moecap/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "moecap/cap.hpp"
#include "moecap/costing.hpp"
#include "moecap/error.hpp"
#include "moecap/hardware.hpp"
#include "moecap/metrics.hpp"
#include "moecap/model.hpp"
#include "moecap/planner.hpp"
#include "moecap/report.hpp"
#include "moecap/routing.hpp"
#include "moecap/trace.hpp"

#ifndef MOECAP_DATA_DIR
#define MOECAP_DATA_DIR "."
#endif

namespace moecap::cli {
namespace {

using nlohmann::json;

std::filesystem::path env_path(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? std::filesystem::path(v) : std::filesystem::path();
}

// Sends text to a file, or to `fallback` when path is empty or "-".
void emit(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("output", "cannot write " + path);
  f << text;
}

std::string dump(const json& doc) {
  std::ostringstream ss;
  write_json(ss, doc);
  return ss.str();
}

void error_doc(std::ostream& err, const std::string& kind, const std::string& message, json extra = json::object()) {
  json e = {{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) e[k] = v;
  err << json{{"error", e}}.dump(2) << '\n';
}

RoutingDistribution load_distribution(const std::string& text, const std::string& file, InputDigest& digest) {
  if (file.empty()) return RoutingDistribution::parse(text);
  const auto bytes = read_file_bytes(file);
  digest.add_bytes("distribution", bytes);
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ValidationError("distribution", std::string("malformed distribution file: ") + e.what());
  }
  if (doc.is_object()) {
    if (!doc.contains("weights")) throw ValidationError("distribution.weights", "missing required field");
    doc = doc["weights"];
  }
  if (!doc.is_array()) throw ValidationError("distribution", "expected an array of weights");
  std::vector<double> w;
  for (const auto& x : doc) {
    if (!x.is_number()) throw ValidationError("distribution", "weights must be numbers");
    w.push_back(x.get<double>());
  }
  return RoutingDistribution::empirical(std::move(w));
}

// ---- metrics ----

struct MetricsArgs {
  std::string model, trace, catalog, device, precision = "fp16", flops_precision = "fp16", output, csv;
  double peak_bandwidth_gbps = 0.0, peak_flops = 0.0;
  std::uint64_t seq_len = 1, kv_context = 0;
  bool no_embeddings = false, offload = false;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  InputDigest digest;
  const auto desc = load_model_descriptor_file(a.model);
  digest.add_file("model", a.model);
  const auto sheet = load_activation_sheet_file(a.trace, desc);
  digest.add_file("trace", a.trace);
  const auto prec = Precision::parse(a.precision);

  HardwarePeaks peaks;
  std::string device_name;
  if (!a.device.empty()) {
    const auto cat_path = a.catalog.empty() ? default_catalog_path() : std::filesystem::path(a.catalog);
    const auto catalog = load_catalog_file(cat_path);
    digest.add_file("catalog", cat_path);
    const auto* dev = find_device(catalog, a.device);
    if (!dev) throw ValidationError("device", "'" + a.device + "' not in catalog");
    device_name = dev->name;
    peaks.bandwidth_bytes_per_s = dev->effective_bandwidth_gbps(a.offload) * kBytesPerGB;
    if (auto f = dev->flops(a.flops_precision)) peaks.flops_per_s = *f;
  }
  if (a.peak_bandwidth_gbps > 0) peaks.bandwidth_bytes_per_s = a.peak_bandwidth_gbps * kBytesPerGB;
  if (a.peak_flops > 0) peaks.flops_per_s = a.peak_flops;
  if (!(peaks.bandwidth_bytes_per_s > 0))
    throw ValidationError("peak_bandwidth", "give --device or --peak-bandwidth-gbps");
  if (!(peaks.flops_per_s > 0))
    throw ValidationError("peak_flops", "no " + a.flops_precision + " FLOPS for the device; give --peak-flops");

  MetricOptions mo;
  mo.accounting.include_embeddings = !a.no_embeddings;
  mo.seq_len = a.seq_len;
  if (a.kv_context > 0) mo.kv_context_len = a.kv_context;
  const auto report = compute_metric_report(sheet, desc, prec, peaks, mo);

  json doc = {{"command", "metrics"},
              {"input_digest", digest.to_json()},
              {"precision", prec.name()},
              {"device", device_name.empty() ? json() : json(device_name)},
              {"peak_bandwidth_bytes_per_s", peaks.bandwidth_bytes_per_s},
              {"peak_flops_per_s", peaks.flops_per_s},
              {"include_embeddings", !a.no_embeddings},
              {"seq_len", a.seq_len},
              {"report", to_json(report)}};
  emit(a.output, out, dump(doc));
  if (!a.csv.empty()) {
    std::ostringstream ss;
    write_metrics_csv(ss, report, digest.combined());
    emit(a.csv, out, ss.str());
  }
  return kOk;
}

// ---- plan ----

struct PlanArgs {
  std::vector<std::string> models, modes{"batch1", "full"};
  std::string catalog, precision = "int8", trace, dist = "uniform", dist_file, output, csv,
                       flops_precision = "fp16";
  double slo = 0.1, efficiency = 0.3558, efficiency_mfu = 1.0, kv_bytes = 0.0;
  std::uint64_t batch = 1, seq_len = 1;
  std::vector<std::uint64_t> batches;
  bool fig2 = false, offload = false, include_ops = false, no_embeddings = false;
};

int cmd_plan(const PlanArgs& a, std::ostream& out) {
  InputDigest digest;
  if (a.models.empty()) throw ValidationError("model", "at least one --model is required");
  std::vector<ModelDescriptor> models;
  for (const auto& m : a.models) {
    models.push_back(load_model_descriptor_file(m));
    digest.add_file("model", m);
  }
  const auto cat_path = a.catalog.empty() ? default_catalog_path() : std::filesystem::path(a.catalog);
  const auto catalog = load_catalog_file(cat_path);
  digest.add_file("catalog", cat_path);
  if (catalog.empty()) throw ValidationError("catalog", "catalog has no devices");

  const auto prec = Precision::parse(a.precision);
  const SloSpec slo{a.slo};
  AccountingOptions acc;
  acc.include_embeddings = !a.no_embeddings;

  const json assumptions = {{"precision", prec.name()},
                            {"bytes_per_param", prec.bytes_per_param()},
                            {"tpot_s", a.slo},
                            {"efficiency_mbu", a.efficiency},
                            {"efficiency_mfu", a.efficiency_mfu},
                            {"include_embeddings", acc.include_embeddings},
                            {"use_offload", a.offload}};

  if (a.fig2) {
    BandwidthMapAssumptions bm;
    bm.precision = prec;
    bm.efficiency = a.efficiency;
    bm.slo = slo;
    json doc = {{"command", "plan"}, {"recipe", "bandwidth_vs_power"}, {"input_digest", digest.to_json()}};
    doc["plot"] = bandwidth_map_plot_data(models, catalog, bm, acc);
    emit(a.output, out, dump(doc));
    return kOk;
  }
  if (models.size() != 1) throw ValidationError("model", "exactly one --model unless --fig2");
  const auto& desc = models.front();

  std::optional<ActivationSheet> sheet;
  if (!a.trace.empty()) {
    sheet = load_activation_sheet_file(a.trace, desc);
    digest.add_file("trace", a.trace);
  }
  const auto dist = load_distribution(a.dist, a.dist_file, digest);

  RequirementOptions ro;
  ro.efficiency_mbu = a.efficiency;
  ro.efficiency_mfu = a.efficiency_mfu;
  ro.kv_bytes = a.kv_bytes;
  ro.include_ops = a.include_ops;
  ro.seq_len = a.seq_len;
  ro.accounting = acc;

  json reqs = json::array();
  for (const auto& m : a.modes) {
    ActivationMode mode;
    if (m == "batch1") {
      mode = Batch1Analytic{};
    } else if (m == "full") {
      mode = FullActivation{};
    } else if (m == "trace") {
      if (!sheet) throw ValidationError("trace", "mode 'trace' needs --trace");
      mode = TraceActivation{&*sheet};
    } else if (m == "expected") {
      mode = ExpectedActivation{a.batch, dist};
    } else {
      throw ValidationError("mode", "unknown activation mode '" + m + "'");
    }
    const auto req = plan_requirement(desc, prec, slo, mode, ro);
    auto j = to_json(req);
    json verdicts = json::array();
    for (const auto& v : feasibility(req, catalog, a.offload, a.flops_precision)) verdicts.push_back(to_json(v));
    j["feasibility"] = verdicts;
    reqs.push_back(std::move(j));
  }

  json doc = {{"command", "plan"},
              {"input_digest", digest.to_json()},
              {"model", desc.name},
              {"assumptions", assumptions},
              {"requirements", reqs}};
  if (!a.batches.empty()) {
    const auto sweep = batch_sweep(desc, dist, a.batches, slo, prec, a.efficiency, catalog, a.offload, acc);
    json s = json::array();
    for (const auto& p : sweep) s.push_back(to_json(p));
    doc["sweep"] = {{"distribution", dist.describe()}, {"points", s}};
    if (!a.csv.empty()) {
      std::ostringstream ss;
      write_sweep_csv(ss, sweep, digest.combined());
      emit(a.csv, out, ss.str());
    }
  }
  emit(a.output, out, dump(doc));
  return kOk;
}

// ---- simulate ----

struct SimulateArgs {
  std::string model, dist = "uniform", dist_file, phase = "decode", output;
  std::uint64_t batch = 1, passes = 1, seed = 0, prompt_len = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  InputDigest digest;
  const auto desc = load_model_descriptor_file(a.model);
  digest.add_file("model", a.model);
  const auto dist = load_distribution(a.dist, a.dist_file, digest);

  SimulationConfig cfg;
  cfg.batch = a.batch;
  cfg.n_passes = a.passes;
  cfg.seed = a.seed;
  cfg.phase = parse_phase(a.phase);
  cfg.prompt_len = a.prompt_len;
  auto sheet = simulate_routing(desc, dist, cfg);
  sheet.header_comments = {"# generator: moecap simulate",
                           "# seed: " + std::to_string(a.seed),
                           "# distribution: " + dist.describe(),
                           "# input_digest: sha256:" + digest.combined()};
  emit(a.output, out, serialize_activation_sheet(sheet));
  return kOk;
}

// ---- cost / radar / recommend ----

struct CostArgs {
  std::string input, output;
};

int cmd_cost(const CostArgs& a, std::ostream& out) {
  InputDigest digest;
  const auto in = load_cost_inputs_file(a.input);
  digest.add_file("cost_inputs", a.input);
  json doc = {{"command", "cost"},
              {"input_digest", digest.to_json()},
              {"inputs", to_json(in)},
              {"breakdown", to_json(cost_breakdown(in))}};
  emit(a.output, out, dump(doc));
  return kOk;
}

struct RadarArgs {
  std::string records, output;
};

int cmd_radar(const RadarArgs& a, std::ostream& out) {
  InputDigest digest;
  const auto recs = load_cap_records_file(a.records);
  digest.add_file("records", a.records);
  const auto ds = normalize_radar(recs);
  json doc = {{"command", "radar"}, {"input_digest", digest.to_json()}, {"radar", to_json(ds, classify_tradeoff(ds))}};
  emit(a.output, out, dump(doc));
  return kOk;
}

struct RecommendArgs {
  std::string rules, tier, primary, secondary, output;
  std::uint64_t batch = 1;
};

int cmd_recommend(const RecommendArgs& a, std::ostream& out) {
  InputDigest digest;
  const auto path = a.rules.empty() ? data_dir() / "rules" / "decision_matrix.json" : std::filesystem::path(a.rules);
  const auto rules = load_rules_file(path);
  digest.add_file("rules", path);
  RecommendQuery q;
  q.tier = parse_device_class(a.tier);
  q.batch = a.batch;
  if (q.batch < 1) throw ValidationError("batch", "must be >= 1");
  q.primary = parse_constraint(a.primary);
  q.secondary = parse_constraint(a.secondary);
  json doc = {{"command", "recommend"},
              {"input_digest", digest.to_json()},
              {"query",
               {{"tier", std::string(to_string(q.tier))},
                {"batch", q.batch},
                {"primary", std::string(to_string(q.primary))},
                {"secondary", std::string(to_string(q.secondary))}}},
              {"result", to_json(recommend(rules, q))}};
  emit(a.output, out, dump(doc));
  return kOk;
}

}  // namespace

std::filesystem::path data_dir() {
  auto p = env_path("MOECAP_DATA_DIR");
  return p.empty() ? std::filesystem::path(MOECAP_DATA_DIR) : p;
}

std::filesystem::path default_catalog_path() {
  auto p = env_path("MOECAP_CATALOG");
  return p.empty() ? data_dir() / "catalog" / "default.json" : p;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MoE deployment analysis: sparsity-aware utilization, cost and hardware planning", "moecap"};
  app.require_subcommand(1);

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "S-MBU/S-MFU and vanilla metrics over an activation trace");
  metrics->add_option("--model", ma.model, "Model descriptor (JSON)")->required();
  metrics->add_option("--trace", ma.trace, "Activation trace")->required();
  metrics->add_option("--catalog", ma.catalog, "Hardware catalog (default: $MOECAP_CATALOG or shipped)");
  metrics->add_option("--device", ma.device, "Catalog device supplying peak bandwidth and FLOPS");
  metrics->add_option("--peak-bandwidth-gbps", ma.peak_bandwidth_gbps, "Peak bandwidth override, GB/s");
  metrics->add_option("--peak-flops", ma.peak_flops, "Peak FLOP/s override");
  metrics->add_option("--precision", ma.precision, "Weight precision")->capture_default_str();
  metrics->add_option("--flops-precision", ma.flops_precision, "Catalog FLOPS entry to use")->capture_default_str();
  metrics->add_option("--seq-len", ma.seq_len, "Context length for attention FLOPs")->capture_default_str();
  metrics->add_option("--kv-context", ma.kv_context, "Context length for KV bytes when the trace has none");
  metrics->add_flag("--no-embeddings", ma.no_embeddings, "Exclude embedding parameters");
  metrics->add_flag("--offload", ma.offload, "Use the device's offload bandwidth");
  metrics->add_option("--output,-o", ma.output, "Report path (default stdout)");
  metrics->add_option("--csv", ma.csv, "Per-pass CSV path");

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "Bandwidth/OPS requirements and device feasibility");
  plan->add_option("--model", pa.models, "Model descriptor(s)")->required();
  plan->add_option("--catalog", pa.catalog, "Hardware catalog");
  plan->add_option("--precision", pa.precision, "Weight precision")->capture_default_str();
  plan->add_option("--slo", pa.slo, "TPOT target, s/token")->capture_default_str();
  plan->add_option("--efficiency", pa.efficiency, "Achievable S-MBU (practical divisor)")->capture_default_str();
  plan->add_option("--efficiency-mfu", pa.efficiency_mfu, "Achievable S-MFU")->capture_default_str();
  plan->add_option("--mode", pa.modes, "batch1, full, trace, expected")->delimiter(',')->capture_default_str();
  plan->add_option("--trace", pa.trace, "Trace for trace mode");
  plan->add_option("--batch", pa.batch, "Batch size for expected mode")->capture_default_str();
  plan->add_option("--dist", pa.dist, "uniform | zipf:<s>")->capture_default_str();
  plan->add_option("--dist-file", pa.dist_file, "Empirical routing weights (JSON)");
  plan->add_option("--batches", pa.batches, "Ascending batch sizes to sweep")->delimiter(',');
  plan->add_option("--kv-bytes", pa.kv_bytes, "KV bytes read per step")->capture_default_str();
  plan->add_flag("--include-ops", pa.include_ops, "Also compute the OPS requirement");
  plan->add_option("--seq-len", pa.seq_len, "Context length for OPS")->capture_default_str();
  plan->add_option("--flops-precision", pa.flops_precision, "Catalog FLOPS entry to use")->capture_default_str();
  plan->add_flag("--offload", pa.offload, "Judge devices by offload bandwidth");
  plan->add_flag("--no-embeddings", pa.no_embeddings, "Exclude embedding parameters");
  plan->add_flag("--fig2", pa.fig2, "Emit bandwidth-vs-power plot data for the given models");
  plan->add_option("--output,-o", pa.output, "Report path (default stdout)");
  plan->add_option("--csv", pa.csv, "Sweep CSV path");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Seeded synthetic routing trace");
  sim->add_option("--model", sa.model, "Model descriptor")->required();
  sim->add_option("--seed", sa.seed, "Master seed")->required();
  sim->add_option("--batch", sa.batch, "Sequences per pass")->capture_default_str();
  sim->add_option("--passes", sa.passes, "Number of passes")->capture_default_str();
  sim->add_option("--dist", sa.dist, "uniform | zipf:<s>")->capture_default_str();
  sim->add_option("--dist-file", sa.dist_file, "Empirical routing weights (JSON)");
  sim->add_option("--phase", sa.phase, "decode | prefill")->capture_default_str();
  sim->add_option("--prompt-len", sa.prompt_len, "Tokens per sequence in prefill")->capture_default_str();
  sim->add_option("--output,-o", sa.output, "Trace path (default stdout)");

  CostArgs ca;
  auto* cost = app.add_subcommand("cost", "Purchase, energy and per-token cost");
  cost->add_option("--input", ca.input, "Cost inputs (JSON)")->required();
  cost->add_option("--output,-o", ca.output, "Report path (default stdout)");

  RadarArgs ra;
  auto* radar = app.add_subcommand("radar", "CAP radar data and trade-off labels");
  radar->add_option("--records", ra.records, "CAP records (JSON)")->required();
  radar->add_option("--output,-o", ra.output, "Report path (default stdout)");

  RecommendArgs rc;
  auto* rec = app.add_subcommand("recommend", "Decision-matrix recommendation");
  rec->add_option("--rules", rc.rules, "Rule table (default: shipped)");
  rec->add_option("--tier", rc.tier, "edge | low_power | workstation | datacenter")->required();
  rec->add_option("--batch", rc.batch, "Batch size")->required();
  rec->add_option("--primary", rc.primary, "cost | power_cost | accuracy | latency | throughput")->required();
  rec->add_option("--secondary", rc.secondary, "Secondary constraint")->required();
  rec->add_option("--output,-o", rc.output, "Report path (default stdout)");

  std::vector<std::string> argv_store{"moecap"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    error_doc(err, "usage", e.what());
    return kValidation;
  }

  try {
    if (*metrics) return cmd_metrics(ma, out);
    if (*plan) return cmd_plan(pa, out);
    if (*sim) return cmd_simulate(sa, out);
    if (*cost) return cmd_cost(ca, out);
    if (*radar) return cmd_radar(ra, out);
    if (*rec) return cmd_recommend(rc, out);
  } catch (const TraceError& e) {
    json extra = {{"field", e.field()}};
    extra["line"] = e.line() > 0 ? json(e.line()) : json();
    extra["pass_id"] = e.pass_id() >= 0 ? json(e.pass_id()) : json();
    error_doc(err, "trace", e.what(), extra);
    return kValidation;
  } catch (const ValidationError& e) {
    error_doc(err, "validation", e.what(), {{"field", e.field()}});
    return kValidation;
  } catch (const ConfigurationError& e) {
    error_doc(err, "configuration", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    error_doc(err, "internal", e.what());
    return kInternal;
  }
  error_doc(err, "internal", "no subcommand ran");
  return kInternal;
}

}  // namespace moecap::cli

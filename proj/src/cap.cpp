#include "moecap/cap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "moecap/error.hpp"

namespace moecap {
namespace {

std::string normalize_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

nlohmann::json parse_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(what, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(what, std::string("malformed document: ") + e.what());
  }
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + "." + key, "missing required field");
  return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw ValidationError(where + "." + key, "must be a string");
  return v.get<std::string>();
}

double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw ValidationError(where + "." + key, "must be a number");
  return v.get<double>();
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::higher_better ? "higher_better" : "lower_better"; }

std::string_view to_string(CostKind k) {
  switch (k) {
    case CostKind::purchase_usd: return "purchase_usd";
    case CostKind::power_watts: return "power_watts";
    case CostKind::cost_per_token_usd: return "cost_per_token_usd";
  }
  return "unknown";
}

std::string_view to_string(AccuracyKind k) {
  switch (k) {
    case AccuracyKind::exact_match: return "exact_match";
    case AccuracyKind::f1: return "f1";
    case AccuracyKind::win_rate: return "win_rate";
  }
  return "unknown";
}

std::string_view to_string(PerfKind k) {
  switch (k) {
    case PerfKind::tpot_s: return "tpot_s";
    case PerfKind::throughput_tps: return "throughput_tps";
    case PerfKind::s_mbu: return "s_mbu";
    case PerfKind::s_mfu: return "s_mfu";
  }
  return "unknown";
}

Direction parse_direction(std::string_view s) {
  if (s == "higher_better") return Direction::higher_better;
  if (s == "lower_better") return Direction::lower_better;
  throw ValidationError("direction", "unknown direction '" + std::string(s) + "'");
}

CostKind parse_cost_kind(std::string_view s) {
  for (auto k : {CostKind::purchase_usd, CostKind::power_watts, CostKind::cost_per_token_usd})
    if (to_string(k) == s) return k;
  throw ValidationError("cost_kind", "unknown kind '" + std::string(s) + "'");
}

AccuracyKind parse_accuracy_kind(std::string_view s) {
  for (auto k : {AccuracyKind::exact_match, AccuracyKind::f1, AccuracyKind::win_rate})
    if (to_string(k) == s) return k;
  throw ValidationError("accuracy_kind", "unknown kind '" + std::string(s) + "'");
}

PerfKind parse_perf_kind(std::string_view s) {
  for (auto k : {PerfKind::tpot_s, PerfKind::throughput_tps, PerfKind::s_mbu, PerfKind::s_mfu})
    if (to_string(k) == s) return k;
  throw ValidationError("perf_kind", "unknown kind '" + std::string(s) + "'");
}

Direction default_direction(CostKind) { return Direction::lower_better; }
Direction default_direction(AccuracyKind) { return Direction::higher_better; }
Direction default_direction(PerfKind k) {
  return k == PerfKind::tpot_s ? Direction::lower_better : Direction::higher_better;
}

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::cost: return "cost";
    case Axis::accuracy: return "accuracy";
    case Axis::performance: return "performance";
  }
  return "unknown";
}

std::string_view to_string(Tradeoff t) {
  switch (t) {
    case Tradeoff::PA: return "PA";
    case Tradeoff::PC: return "PC";
    case Tradeoff::CA: return "CA";
  }
  return "unknown";
}

void validate(const CapRecord& r) {
  const std::string where = r.system_name.empty() ? "record" : r.system_name;
  if (r.system_name.empty()) throw ValidationError("system_name", "must be non-empty");
  for (auto [v, f] : {std::pair{r.cost_value, "cost_value"}, std::pair{r.accuracy_value, "accuracy_value"},
                      std::pair{r.perf_value, "perf_value"}}) {
    if (!std::isfinite(v)) throw ValidationError(where + "." + f, "must be finite");
  }
  if (r.accuracy_value < 0.0 || r.accuracy_value > 1.0)
    throw ValidationError(where + ".accuracy_value", "must be a fraction in [0, 1]");
}

RadarDataset normalize_radar(const std::vector<CapRecord>& records) {
  if (records.size() < 2) throw ValidationError("records", "need at least 2 records");
  for (const auto& r : records) validate(r);

  const auto& first = records.front();
  for (const auto& r : records) {
    if (r.cost_kind != first.cost_kind || r.cost_direction != first.cost_direction)
      throw ValidationError(r.system_name + ".cost_kind", "mixed kinds on the cost axis");
    if (r.accuracy_kind != first.accuracy_kind || r.accuracy_direction != first.accuracy_direction)
      throw ValidationError(r.system_name + ".accuracy_kind", "mixed kinds on the accuracy axis");
    if (r.perf_kind != first.perf_kind || r.perf_direction != first.perf_direction)
      throw ValidationError(r.system_name + ".perf_kind", "mixed kinds on the performance axis");
  }

  RadarDataset d;
  d.axes[0] = {std::string(to_string(first.cost_kind)), first.cost_direction, 0, 0};
  d.axes[1] = {std::string(to_string(first.accuracy_kind)), first.accuracy_direction, 0, 0};
  d.axes[2] = {std::string(to_string(first.perf_kind)), first.perf_direction, 0, 0};

  for (const auto& r : records) d.systems.push_back({r.system_name, {r.cost_value, r.accuracy_value, r.perf_value}, {}});

  for (std::size_t a = 0; a < kAxes; ++a) {
    auto [lo, hi] = std::minmax_element(d.systems.begin(), d.systems.end(),
                                        [a](const RadarPoint& x, const RadarPoint& y) { return x.raw[a] < y.raw[a]; });
    auto& ax = d.axes[a];
    ax.min = lo->raw[a];
    ax.max = hi->raw[a];
    const double span = ax.max - ax.min;
    for (auto& p : d.systems) {
      if (span == 0.0) {
        p.coords[a] = 1.0;
        continue;
      }
      const double c = ax.direction == Direction::higher_better ? (p.raw[a] - ax.min) / span : (ax.max - p.raw[a]) / span;
      p.coords[a] = std::clamp(c, 0.0, 1.0);
    }
  }
  return d;
}

std::vector<Classification> classify_tradeoff(const RadarDataset& dataset) {
  std::vector<Classification> out;
  for (const auto& p : dataset.systems) {
    std::size_t worst = 0;
    for (std::size_t a = 1; a < kAxes; ++a) {
      if (p.coords[a] < p.coords[worst]) worst = a;
    }
    Classification c;
    c.system_name = p.system_name;
    c.sacrificed = static_cast<Axis>(worst);
    switch (c.sacrificed) {
      case Axis::cost: c.label = Tradeoff::PA; break;
      case Axis::accuracy: c.label = Tradeoff::PC; break;
      case Axis::performance: c.label = Tradeoff::CA; break;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CapRecord> cap_records_from_json(const nlohmann::json& doc) {
  const nlohmann::json* arr = &doc;
  if (doc.is_object()) {
    for (const auto& [k, _] : doc.items()) {
      if (k != "records" && k != "notes") throw ValidationError(k, "unknown key");
    }
    arr = &require(doc, "records", "cap");
  }
  if (!arr->is_array()) throw ValidationError("records", "must be an array");

  static const std::set<std::string> keys = {"system_name",        "cost_value",  "cost_kind",      "cost_direction",
                                             "accuracy_value",     "accuracy_kind", "accuracy_direction",
                                             "perf_value",         "perf_kind",   "perf_direction", "notes"};
  std::vector<CapRecord> out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& j = (*arr)[i];
    const std::string where = "records[" + std::to_string(i) + "]";
    if (!j.is_object()) throw ValidationError(where, "must be an object");
    for (const auto& [k, _] : j.items()) {
      if (!keys.contains(k)) throw ValidationError(where + "." + k, "unknown key");
    }
    CapRecord r;
    r.system_name = require_string(j, "system_name", where);
    r.cost_value = require_number(j, "cost_value", where);
    r.cost_kind = parse_cost_kind(require_string(j, "cost_kind", where));
    r.cost_direction = j.contains("cost_direction") ? parse_direction(require_string(j, "cost_direction", where))
                                                    : default_direction(r.cost_kind);
    r.accuracy_value = require_number(j, "accuracy_value", where);
    r.accuracy_kind = parse_accuracy_kind(require_string(j, "accuracy_kind", where));
    r.accuracy_direction = j.contains("accuracy_direction")
                               ? parse_direction(require_string(j, "accuracy_direction", where))
                               : default_direction(r.accuracy_kind);
    r.perf_value = require_number(j, "perf_value", where);
    r.perf_kind = parse_perf_kind(require_string(j, "perf_kind", where));
    r.perf_direction = j.contains("perf_direction") ? parse_direction(require_string(j, "perf_direction", where))
                                                    : default_direction(r.perf_kind);
    validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CapRecord> load_cap_records_file(const std::filesystem::path& path) {
  return cap_records_from_json(parse_file(path, "records"));
}

nlohmann::json to_json(const CapRecord& r) {
  return {{"system_name", r.system_name},
          {"cost_value", r.cost_value},
          {"cost_kind", std::string(to_string(r.cost_kind))},
          {"cost_direction", std::string(to_string(r.cost_direction))},
          {"accuracy_value", r.accuracy_value},
          {"accuracy_kind", std::string(to_string(r.accuracy_kind))},
          {"accuracy_direction", std::string(to_string(r.accuracy_direction))},
          {"perf_value", r.perf_value},
          {"perf_kind", std::string(to_string(r.perf_kind))},
          {"perf_direction", std::string(to_string(r.perf_direction))}};
}

nlohmann::json to_json(const RadarDataset& d, const std::vector<Classification>& labels) {
  nlohmann::json axes = nlohmann::json::array();
  for (std::size_t a = 0; a < kAxes; ++a) {
    axes.push_back({{"axis", std::string(to_string(static_cast<Axis>(a)))},
                    {"kind", d.axes[a].kind},
                    {"direction", std::string(to_string(d.axes[a].direction))},
                    {"min", d.axes[a].min},
                    {"max", d.axes[a].max}});
  }
  nlohmann::json systems = nlohmann::json::array();
  for (std::size_t i = 0; i < d.systems.size(); ++i) {
    const auto& p = d.systems[i];
    nlohmann::json s = {{"system_name", p.system_name}, {"raw", p.raw}, {"polygon", p.coords}};
    if (i < labels.size()) {
      s["label"] = std::string(to_string(labels[i].label));
      s["sacrificed_axis"] = std::string(to_string(labels[i].sacrificed));
    }
    systems.push_back(std::move(s));
  }
  return {{"axes", axes}, {"systems", systems}};
}

// ---- decision matrix ----

std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::cost: return "cost";
    case Constraint::power_cost: return "power_cost";
    case Constraint::accuracy: return "accuracy";
    case Constraint::latency: return "latency";
    case Constraint::throughput: return "throughput";
  }
  return "unknown";
}

Constraint parse_constraint(std::string_view s) {
  std::string t = normalize_token(s);
  if (t.rfind("performance", 0) == 0 && t.size() > 11) t = t.substr(11);
  if (t == "cost") return Constraint::cost;
  if (t == "powercost" || t == "power") return Constraint::power_cost;
  if (t == "accuracy") return Constraint::accuracy;
  if (t == "latency") return Constraint::latency;
  if (t == "throughput") return Constraint::throughput;
  throw ValidationError("constraint", "unknown constraint '" + std::string(s) + "'");
}

void validate_rules(const std::vector<DecisionRule>& rules) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& a = rules[i];
    if (a.batch_min < 1) throw ConfigurationError("rule " + std::to_string(i) + ": batch_min must be >= 1");
    if (a.batch_max && *a.batch_max < a.batch_min)
      throw ConfigurationError("rule " + std::to_string(i) + ": empty batch range");
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      const auto& b = rules[j];
      if (a.tier != b.tier || a.primary != b.primary || a.secondary != b.secondary) continue;
      const bool disjoint = (a.batch_max && *a.batch_max < b.batch_min) || (b.batch_max && *b.batch_max < a.batch_min);
      if (!disjoint)
        throw ConfigurationError("rules " + std::to_string(i) + " and " + std::to_string(j) +
                                 " overlap on (" + std::string(to_string(a.tier)) + ", " +
                                 std::string(to_string(a.primary)) + ", " + std::string(to_string(a.secondary)) + ")");
    }
  }
}

std::vector<DecisionRule> rules_from_json(const nlohmann::json& doc) {
  const nlohmann::json* arr = &doc;
  if (doc.is_object()) {
    for (const auto& [k, _] : doc.items()) {
      if (k != "rules" && k != "notes") throw ValidationError(k, "unknown key");
    }
    arr = &require(doc, "rules", "rules");
  }
  if (!arr->is_array()) throw ValidationError("rules", "must be an array");

  static const std::set<std::string> keys = {"tier",    "example_hardware",   "batch_min",     "batch_max",
                                             "primary", "secondary",          "recommended_system",
                                             "configuration", "reason",       "use_case"};
  std::vector<DecisionRule> out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& j = (*arr)[i];
    const std::string where = "rules[" + std::to_string(i) + "]";
    if (!j.is_object()) throw ValidationError(where, "must be an object");
    for (const auto& [k, _] : j.items()) {
      if (!keys.contains(k)) throw ValidationError(where + "." + k, "unknown key");
    }
    DecisionRule r;
    r.tier = parse_device_class(require_string(j, "tier", where));
    if (j.contains("example_hardware")) r.example_hardware = require_string(j, "example_hardware", where);
    const auto& bmin = require(j, "batch_min", where);
    if (!bmin.is_number_unsigned()) throw ValidationError(where + ".batch_min", "must be a positive integer");
    r.batch_min = bmin.get<std::uint64_t>();
    if (j.contains("batch_max") && !j["batch_max"].is_null()) {
      if (!j["batch_max"].is_number_unsigned())
        throw ValidationError(where + ".batch_max", "must be a positive integer or null");
      r.batch_max = j["batch_max"].get<std::uint64_t>();
    }
    r.primary = parse_constraint(require_string(j, "primary", where));
    r.secondary = parse_constraint(require_string(j, "secondary", where));
    r.recommended_system = require_string(j, "recommended_system", where);
    r.configuration = require_string(j, "configuration", where);
    if (j.contains("reason")) r.reason = require_string(j, "reason", where);
    if (j.contains("use_case")) r.use_case = require_string(j, "use_case", where);
    out.push_back(std::move(r));
  }
  validate_rules(out);
  return out;
}

std::vector<DecisionRule> load_rules_file(const std::filesystem::path& path) {
  return rules_from_json(parse_file(path, "rules"));
}

nlohmann::json to_json(const DecisionRule& r) {
  return {{"tier", std::string(to_string(r.tier))},
          {"example_hardware", r.example_hardware},
          {"batch_min", r.batch_min},
          {"batch_max", r.batch_max ? nlohmann::json(*r.batch_max) : nlohmann::json()},
          {"primary", std::string(to_string(r.primary))},
          {"secondary", std::string(to_string(r.secondary))},
          {"recommended_system", r.recommended_system},
          {"configuration", r.configuration},
          {"reason", r.reason},
          {"use_case", r.use_case}};
}

Recommendation recommend(const std::vector<DecisionRule>& rules, const RecommendQuery& q) {
  Recommendation out;
  std::vector<const DecisionRule*> hits;
  for (const auto& r : rules) {
    if (r.tier == q.tier && r.primary == q.primary && r.secondary == q.secondary && r.covers(q.batch))
      hits.push_back(&r);
  }
  if (hits.size() > 1) throw ConfigurationError("ambiguous rule table: " + std::to_string(hits.size()) + " rules match");
  if (hits.size() == 1) {
    out.rule = *hits.front();
    return out;
  }

  int best = 0;
  std::vector<int> scores;
  for (const auto& r : rules) {
    const int s = (r.tier == q.tier) + (r.primary == q.primary) + (r.secondary == q.secondary) + r.covers(q.batch);
    scores.push_back(s);
    best = std::max(best, s);
  }
  if (best > 0) {
    for (std::size_t i = 0; i < rules.size(); ++i) {
      if (scores[i] == best) out.nearest.push_back(rules[i]);
    }
  }
  return out;
}

nlohmann::json to_json(const Recommendation& r) {
  nlohmann::json j;
  j["matched"] = r.rule.has_value();
  j["rule"] = r.rule ? to_json(*r.rule) : nlohmann::json();
  nlohmann::json near = nlohmann::json::array();
  for (const auto& n : r.nearest) near.push_back(to_json(n));
  j["nearest"] = near;
  return j;
}

}  // namespace moecap

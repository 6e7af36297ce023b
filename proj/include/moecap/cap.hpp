#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "moecap/hardware.hpp"

namespace moecap {

enum class Direction { higher_better, lower_better };
enum class CostKind { purchase_usd, power_watts, cost_per_token_usd };
enum class AccuracyKind { exact_match, f1, win_rate };
enum class PerfKind { tpot_s, throughput_tps, s_mbu, s_mfu };

std::string_view to_string(Direction d);
std::string_view to_string(CostKind k);
std::string_view to_string(AccuracyKind k);
std::string_view to_string(PerfKind k);
Direction parse_direction(std::string_view s);
CostKind parse_cost_kind(std::string_view s);
AccuracyKind parse_accuracy_kind(std::string_view s);
PerfKind parse_perf_kind(std::string_view s);

Direction default_direction(CostKind k);
Direction default_direction(AccuracyKind k);
Direction default_direction(PerfKind k);

// Fixed axis order; also the tie-break order for classification.
enum class Axis { cost = 0, accuracy = 1, performance = 2 };
inline constexpr std::size_t kAxes = 3;
std::string_view to_string(Axis a);

struct CapRecord {
  std::string system_name;
  double cost_value = 0.0;
  CostKind cost_kind = CostKind::purchase_usd;
  Direction cost_direction = Direction::lower_better;
  // Supplied from an external evaluation, as a fraction.
  double accuracy_value = 0.0;
  AccuracyKind accuracy_kind = AccuracyKind::exact_match;
  Direction accuracy_direction = Direction::higher_better;
  double perf_value = 0.0;
  PerfKind perf_kind = PerfKind::tpot_s;
  Direction perf_direction = Direction::lower_better;
};

void validate(const CapRecord& r);

struct AxisBounds {
  std::string kind;
  Direction direction = Direction::higher_better;
  double min = 0.0;
  double max = 0.0;
};

struct RadarPoint {
  std::string system_name;
  std::array<double, kAxes> raw{};
  std::array<double, kAxes> coords{};  // 1 = best
};

struct RadarDataset {
  std::array<AxisBounds, kAxes> axes;
  std::vector<RadarPoint> systems;
};

// Min-max per axis with direction; an axis with max == min maps to 1.0.
RadarDataset normalize_radar(const std::vector<CapRecord>& records);

enum class Tradeoff { PA, PC, CA };
std::string_view to_string(Tradeoff t);

struct Classification {
  std::string system_name;
  Axis sacrificed = Axis::cost;
  Tradeoff label = Tradeoff::PA;
};

// The sacrificed axis is the argmin coordinate.
std::vector<Classification> classify_tradeoff(const RadarDataset& dataset);

std::vector<CapRecord> cap_records_from_json(const nlohmann::json& doc);
std::vector<CapRecord> load_cap_records_file(const std::filesystem::path& path);
nlohmann::json to_json(const CapRecord& r);
nlohmann::json to_json(const RadarDataset& d, const std::vector<Classification>& labels);

// ---- decision matrix ----

enum class Constraint { cost, power_cost, accuracy, latency, throughput };
std::string_view to_string(Constraint c);
// Accepts "latency", "Performance(Latency)", "power cost", ...
Constraint parse_constraint(std::string_view s);

struct DecisionRule {
  DeviceClass tier = DeviceClass::workstation;
  std::string example_hardware;
  std::uint64_t batch_min = 1;
  std::optional<std::uint64_t> batch_max;  // inclusive; open-ended when unset
  Constraint primary = Constraint::cost;
  Constraint secondary = Constraint::cost;
  std::string recommended_system;
  std::string configuration;
  std::string reason;
  std::string use_case;

  bool covers(std::uint64_t batch) const { return batch >= batch_min && (!batch_max || batch <= *batch_max); }
};

// Throws ConfigurationError when two rules sharing (tier, primary, secondary)
// have intersecting batch ranges.
void validate_rules(const std::vector<DecisionRule>& rules);
std::vector<DecisionRule> rules_from_json(const nlohmann::json& doc);
std::vector<DecisionRule> load_rules_file(const std::filesystem::path& path);
nlohmann::json to_json(const DecisionRule& r);

struct RecommendQuery {
  DeviceClass tier = DeviceClass::workstation;
  std::uint64_t batch = 1;
  Constraint primary = Constraint::cost;
  Constraint secondary = Constraint::cost;
};

struct Recommendation {
  std::optional<DecisionRule> rule;
  // On no match: the rules agreeing with the query on the most fields.
  std::vector<DecisionRule> nearest;
};

Recommendation recommend(const std::vector<DecisionRule>& rules, const RecommendQuery& query);
nlohmann::json to_json(const Recommendation& r);

}  // namespace moecap

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "moecap/cap.hpp"
#include "moecap/error.hpp"

using namespace moecap;

namespace {

CapRecord rec(std::string name, double cost, double acc, double tpot) {
  CapRecord r;
  r.system_name = std::move(name);
  r.cost_value = cost;
  r.accuracy_value = acc;
  r.perf_value = tpot;
  return r;
}

std::vector<Tradeoff> labels_of(const std::vector<CapRecord>& records) {
  std::vector<Tradeoff> out;
  for (const auto& c : classify_tradeoff(normalize_radar(records))) out.push_back(c.label);
  return out;
}

std::vector<DecisionRule> shipped_rules() {
  return load_rules_file(testing_util::source_path("rules/decision_matrix.json"));
}

}  // namespace

TEST(Cap, NormalizationRespectsDirection) {
  const auto ds = normalize_radar({rec("a", 100, 0.5, 0.1), rec("b", 300, 0.9, 0.3), rec("c", 200, 0.7, 0.2)});
  EXPECT_DOUBLE_EQ(ds.systems[0].coords[0], 1.0);  // cheapest
  EXPECT_DOUBLE_EQ(ds.systems[1].coords[0], 0.0);
  EXPECT_DOUBLE_EQ(ds.systems[2].coords[0], 0.5);
  EXPECT_DOUBLE_EQ(ds.systems[1].coords[1], 1.0);
  EXPECT_DOUBLE_EQ(ds.systems[0].coords[2], 1.0);  // fastest
  EXPECT_DOUBLE_EQ(ds.systems[2].raw[2], 0.2);
}

TEST(Cap, DegenerateAxisMapsToOne) {
  const auto ds = normalize_radar({rec("a", 100, 0.5, 0.1), rec("b", 100, 0.9, 0.3)});
  for (const auto& p : ds.systems) EXPECT_DOUBLE_EQ(p.coords[0], 1.0);
}

TEST(Cap, RejectsBadInput) {
  EXPECT_THROW(normalize_radar({rec("a", 1, 0.5, 0.1)}), ValidationError);
  EXPECT_THROW(validate(rec("a", 1, 1.5, 0.1)), ValidationError);
  auto mixed = rec("b", 1, 0.5, 0.1);
  mixed.perf_kind = PerfKind::throughput_tps;
  mixed.perf_direction = Direction::higher_better;
  EXPECT_THROW(normalize_radar({rec("a", 1, 0.5, 0.1), mixed}), ValidationError);
}

TEST(Cap, ShippedExampleLabels) {
  const auto recs = load_cap_records_file(testing_util::source_path("inputs/cap_qwen3_a5000.json"));
  const auto cls = classify_tradeoff(normalize_radar(recs));
  ASSERT_EQ(cls.size(), 3u);
  EXPECT_EQ(cls[0].system_name, "SGLang");
  EXPECT_EQ(cls[0].label, Tradeoff::PA);
  EXPECT_EQ(cls[1].label, Tradeoff::PC);
  EXPECT_EQ(cls[2].label, Tradeoff::CA);
  EXPECT_EQ(cls[2].sacrificed, Axis::performance);
}

TEST(Cap, TieBreakPrefersCost) {
  const auto ds = normalize_radar({rec("a", 300, 0.5, 0.3), rec("b", 100, 0.9, 0.1)});
  const auto cls = classify_tradeoff(ds);
  EXPECT_EQ(cls[0].sacrificed, Axis::cost);
  EXPECT_EQ(cls[1].sacrificed, Axis::cost);
}

TEST(Cap, LabelsInvariantUnderAffineRescaling) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0), scale(0.01, 1000.0), shift(-100.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CapRecord> base;
    for (int i = 0; i < 4; ++i) base.push_back(rec("s" + std::to_string(i), 100 + 1000 * u(rng), u(rng), 0.01 + u(rng)));
    const auto expected = labels_of(base);
    auto scaled = base;
    const double a = scale(rng), b = 1000 + shift(rng), c = scale(rng), d = shift(rng);
    for (auto& r : scaled) {
      r.cost_value = a * r.cost_value + b;
      r.perf_value = c * r.perf_value + d + 200;
    }
    EXPECT_EQ(labels_of(scaled), expected);
  }
}

TEST(Cap, PermutationAndIdempotence) {
  std::vector<CapRecord> recs{rec("a", 100, 0.5, 0.1), rec("b", 300, 0.9, 0.3), rec("c", 200, 0.7, 0.05)};
  const auto ds = normalize_radar(recs);
  std::reverse(recs.begin(), recs.end());
  const auto rev = normalize_radar(recs);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ds.systems[i].coords, rev.systems[2 - i].coords);

  // Feeding normalized coordinates back (all higher-better) is a fixed point.
  std::vector<CapRecord> again;
  for (const auto& p : ds.systems) {
    auto r = rec(p.system_name, p.coords[0], p.coords[1], p.coords[2]);
    r.cost_direction = r.perf_direction = Direction::higher_better;
    again.push_back(r);
  }
  const auto ds2 = normalize_radar(again);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t a = 0; a < kAxes; ++a) EXPECT_NEAR(ds2.systems[i].coords[a], ds.systems[i].coords[a], 1e-12);
}

TEST(Cap, RadarJsonHasPolygonAndLabel) {
  const auto ds = normalize_radar({rec("a", 100, 0.5, 0.1), rec("b", 300, 0.9, 0.3)});
  const auto j = to_json(ds, classify_tradeoff(ds));
  EXPECT_EQ(j["systems"][0]["polygon"].size(), 3u);
  EXPECT_EQ(j["systems"][0]["label"], "PC");
  EXPECT_EQ(j["systems"][1]["label"], "PA");  // cost and performance tie at 0; cost goes first
}

TEST(Rules, ShippedMatrixIsValid) {
  const auto rules = shipped_rules();
  EXPECT_EQ(rules.size(), 6u);
  EXPECT_NO_THROW(validate_rules(rules));
}

TEST(Rules, ConstraintSpellings) {
  EXPECT_EQ(parse_constraint("Performance(Latency)"), Constraint::latency);
  EXPECT_EQ(parse_constraint("power cost"), Constraint::power_cost);
  EXPECT_EQ(parse_constraint("Throughput"), Constraint::throughput);
  EXPECT_THROW(parse_constraint("vibes"), ValidationError);
}

TEST(Rules, Recommendations) {
  const auto rules = shipped_rules();
  auto r = recommend(rules, {DeviceClass::workstation, 4, Constraint::cost, Constraint::latency});
  ASSERT_TRUE(r.rule);
  EXPECT_EQ(r.rule->recommended_system, "K-Transformers");

  r = recommend(rules, {DeviceClass::datacenter, 32, Constraint::throughput, Constraint::accuracy});
  ASSERT_TRUE(r.rule);
  EXPECT_EQ(r.rule->recommended_system, "SGLang/vLLM");
  EXPECT_EQ(r.rule->configuration, "FP16");

  // Inclusive upper bound.
  r = recommend(rules, {DeviceClass::workstation, 8, Constraint::accuracy, Constraint::cost});
  ASSERT_TRUE(r.rule);
  EXPECT_EQ(r.rule->recommended_system, "MoE-Infinity");

  r = recommend(rules, {DeviceClass::edge, 1, Constraint::cost, Constraint::latency});
  EXPECT_FALSE(r.rule);
  ASSERT_FALSE(r.nearest.empty());
  for (const auto& n : r.nearest) EXPECT_EQ(n.primary, Constraint::cost);
  EXPECT_FALSE(to_json(r)["matched"].get<bool>());
}

TEST(Rules, OverlapIsConfigurationError) {
  auto rules = shipped_rules();
  auto dup = rules[1];
  dup.batch_min = 8;
  dup.batch_max = 12;
  dup.recommended_system = "Other";
  rules.push_back(dup);
  EXPECT_THROW(validate_rules(rules), ConfigurationError);
  EXPECT_THROW(recommend(rules, {DeviceClass::workstation, 8, Constraint::cost, Constraint::latency}),
               ConfigurationError);
  // Adjacent, non-overlapping ranges are fine.
  rules.back().batch_min = 9;
  EXPECT_NO_THROW(validate_rules(rules));
}

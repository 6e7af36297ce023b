#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "moecap/error.hpp"
#include "moecap/planner.hpp"

using namespace moecap;

namespace {

// Descriptor whose analytic active and total counts are exactly 37e9 and
// 671e9 parameters.
ModelDescriptor anchored() {
  ModelDescriptor d;
  d.name = "anchored";
  d.n_layer = 1;
  d.moe_layer_mask = {true};
  d.d_model = 1024;
  d.n_heads = d.n_kv_heads = 1;
  d.head_dim = 64;
  d.n_expert = 51;
  d.top_k = 1;
  d.params_expert = (671'000'000'000ull - 37'000'000'000ull) / 50;
  d.params_attn_layer = 37'000'000'000ull - d.params_expert;
  validate(d);
  return d;
}

Catalog catalog() { return load_catalog_file(testing_util::source_path("catalog/default.json")); }

}  // namespace

TEST(Planner, TheoreticalBandwidthAnchors) {
  const auto d = anchored();
  ASSERT_EQ(total_params(d), 671'000'000'000ull);
  ASSERT_EQ(active_params_analytic(d), 37'000'000'000ull);
  EXPECT_NEAR(theoretical_bandwidth_gbps(d, Precision::int8(), {0.1}, Batch1Analytic{}), 370.0, 1e-9);
  EXPECT_NEAR(theoretical_bandwidth_gbps(d, Precision::int8(), {0.1}, FullActivation{}), 6710.0, 1e-9);
  EXPECT_NEAR(theoretical_bandwidth_gbps(d, Precision::int8(), {0.2}, FullActivation{}), 3355.0, 1e-9);
}

TEST(Planner, PracticalDivisor) {
  EXPECT_DOUBLE_EQ(practical_bandwidth(400, 0.5), 800);
  EXPECT_NEAR(practical_bandwidth(370, 0.3558), 1040, 0.5);
  EXPECT_NEAR(practical_bandwidth(6710, 0.355), 18901, 1);
  EXPECT_DOUBLE_EQ(practical_ops(1e12, 0.5), 2e12);
  EXPECT_DOUBLE_EQ(practical_ops(1e12, 1.0), 1e12);
  EXPECT_THROW(practical_bandwidth(1, 0.0), ValidationError);
  EXPECT_THROW(practical_bandwidth(1, 1.01), ValidationError);
  EXPECT_THROW(practical_ops(1, -0.1), ValidationError);
}

TEST(Planner, OpsRequirement) {
  const auto d = testing_util::toy_descriptor();
  const double theo = theoretical_ops(d, 1, 1, {0.1});
  EXPECT_DOUBLE_EQ(theo, sparse_flops_per_token(d, 1) / 0.1);
  EXPECT_DOUBLE_EQ(practical_ops(theo, 0.25), 4 * theo);
  RequirementOptions o;
  o.include_ops = true;
  o.efficiency_mfu = 0.25;
  const auto r = plan_requirement(d, Precision::fp16(), {0.1}, Batch1Analytic{}, o);
  ASSERT_TRUE(r.practical_ops.has_value());
  EXPECT_DOUBLE_EQ(*r.practical_ops, 4 * theo);
}

TEST(Planner, TraceModeNeedsSheet) {
  const auto d = testing_util::toy_descriptor();
  EXPECT_THROW(theoretical_bandwidth_gbps(d, Precision::fp16(), {0.1}, TraceActivation{}), ValidationError);
  const auto toy = load_model_descriptor_file(testing_util::source_path("models/toy-moe.json"));
  const auto s = load_activation_sheet_file(testing_util::source_path("traces/toy-sample.trace"), toy);
  const double t = theoretical_bandwidth_gbps(toy, Precision::fp16(), {0.1}, TraceActivation{&s});
  EXPECT_GT(t, theoretical_bandwidth_gbps(toy, Precision::fp16(), {0.1}, Batch1Analytic{}) - 1e-9);
  EXPECT_LE(t, theoretical_bandwidth_gbps(toy, Precision::fp16(), {0.1}, FullActivation{}) + 1e-9);
}

TEST(Planner, SloInverseLaw) {
  const auto d = testing_util::toy_descriptor();
  for (double slo : {0.01, 0.1, 0.25, 3.0}) {
    EXPECT_NEAR(theoretical_bandwidth_gbps(d, Precision::fp16(), {slo}, Batch1Analytic{}) * slo,
                active_param_bytes_analytic(d, Precision::fp16()) / 1e9, 1e-12);
  }
  EXPECT_THROW(theoretical_bandwidth_gbps(d, Precision::fp16(), {0.0}, Batch1Analytic{}), ValidationError);
}

TEST(Planner, FeasibilitySortedAndThresholded) {
  const auto c = catalog();
  DeploymentRequirement zero;
  const auto all = feasibility(zero, c, false);
  ASSERT_EQ(all.size(), c.size());
  for (const auto& v : all) EXPECT_TRUE(v.satisfied);
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_TRUE(all[i - 1].tdp_watts < all[i].tdp_watts ||
                (all[i - 1].tdp_watts == all[i].tdp_watts && all[i - 1].price_usd <= all[i].price_usd));
  }
  DeploymentRequirement full;
  full.practical_bandwidth_gbps = 18901;
  for (const auto& v : feasibility(full, c, false)) {
    const auto* d = find_device(c, v.device);
    EXPECT_EQ(v.satisfied, d->aggregate) << v.device;
  }
}

TEST(Planner, OpsRequirementNeedsFlopsEntry) {
  Catalog c(1);
  c[0].name = "no-flops";
  c[0].peak_bandwidth_gbps = 1e6;
  DeploymentRequirement r;
  r.practical_ops = 1.0;
  const auto v = feasibility(r, c, false);
  EXPECT_TRUE(v[0].bandwidth_ok);
  EXPECT_FALSE(v[0].satisfied);
}

TEST(Planner, ScaleInvarianceOfVerdicts) {
  auto c = catalog();
  DeploymentRequirement r;
  r.practical_bandwidth_gbps = 900;
  auto names = [](const std::vector<DeviceVerdict>& vs) {
    std::vector<std::string> out;
    for (const auto& v : vs)
      if (v.satisfied) out.push_back(v.device);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto base = names(feasibility(r, c, false));
  for (double k : {0.5, 2.0, 8.0}) {
    auto scaled = c;
    for (auto& d : scaled) d.peak_bandwidth_gbps *= k;
    auto rs = r;
    rs.practical_bandwidth_gbps *= k;
    EXPECT_EQ(names(feasibility(rs, scaled, false)), base);
  }
}

TEST(Planner, SweepMonotoneAndBounded) {
  const auto d = load_model_descriptor_file(testing_util::source_path("models/toy-64.json"));
  const auto c = catalog();
  const std::vector<std::uint64_t> batches{1, 2, 4, 8, 16, 64, 1024};
  const auto sweep = batch_sweep(d, RoutingDistribution::uniform(), batches, {0.1}, Precision::fp16(), 0.5, c);
  const double lo = practical_bandwidth(theoretical_bandwidth_gbps(d, Precision::fp16(), {0.1}, Batch1Analytic{}), 0.5);
  const double hi = practical_bandwidth(theoretical_bandwidth_gbps(d, Precision::fp16(), {0.1}, FullActivation{}), 0.5);
  EXPECT_NEAR(sweep.front().practical_bandwidth_gbps, lo, 1e-9 * lo);
  EXPECT_NEAR(sweep.back().practical_bandwidth_gbps, hi, 1e-6 * hi);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    EXPECT_GE(sweep[i].practical_bandwidth_gbps, sweep[i - 1].practical_bandwidth_gbps);
    EXPECT_LE(sweep[i].feasible_devices.size(), sweep[i - 1].feasible_devices.size());
  }
  EXPECT_THROW(batch_sweep(d, RoutingDistribution::uniform(), {4, 2}, {0.1}, Precision::fp16(), 0.5, c),
               ValidationError);
}

TEST(Planner, ExpectedFractionAtBatchEight) {
  // All-expert model: E=64, k=8, no other parameters.
  ModelDescriptor d;
  d.name = "experts-only";
  d.n_layer = 2;
  d.moe_layer_mask = {true, true};
  d.n_expert = 64;
  d.top_k = 8;
  d.params_expert = 1000;
  validate(d);
  const auto sweep = batch_sweep(d, RoutingDistribution::uniform(), {8}, {0.1}, Precision::fp16(), 1.0, {});
  EXPECT_NEAR(sweep[0].activated_fraction, 1 - std::pow(7.0 / 8, 8), 1e-12);
  EXPECT_NEAR(sweep[0].activated_fraction, 0.6564, 1e-4);
}

TEST(Planner, BandwidthMapPlotData) {
  const auto d = anchored();
  const auto j = bandwidth_map_plot_data({d}, catalog());
  EXPECT_EQ(j["devices"].size(), catalog().size());
  const auto& line = j["requirement_lines"][0];
  EXPECT_NEAR(line["batch1_practical_gbps"].get<double>(), 1040, 10.4);
  EXPECT_NEAR(line["full_activation_practical_gbps"].get<double>(), 18901, 189.01);
  EXPECT_TRUE(j["assumptions"]["inferred"].get<bool>());
}

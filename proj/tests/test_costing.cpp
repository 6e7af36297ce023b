#include <gtest/gtest.h>

#include "helpers.hpp"
#include "moecap/costing.hpp"
#include "moecap/error.hpp"

using namespace moecap;

TEST(Costing, WorkedExample) {
  BillOfMaterials bom{.gpu = 10000};
  PowerProfile power{.gpu = 500};
  DeploymentEconomics econ{.runtime_hours = 8760, .energy_price_per_kwh = 0.1, .token_throughput = 1000};
  EXPECT_DOUBLE_EQ(energy_cost_kwh(power, 8760), 4380.0);
  const double c = cost_per_token(bom, power, econ);
  EXPECT_NEAR(c, (10000 + 438.0) / (1000.0 * 8760 * 3600), 1e-20);
  EXPECT_NEAR(c, 3.31e-7, 0.005e-7);
}

TEST(Costing, PurchaseCostIgnoresAnnotations) {
  BillOfMaterials bom{.gpu = 100, .cpu = 10, .motherboard = 5, .dram = 3, .ssd = 2};
  bom.hbm = 40;
  bom.nvlink = 10;
  bom.pcie = 1;
  EXPECT_DOUBLE_EQ(purchase_cost(bom), 120.0);
  bom.c2m = 60;
  EXPECT_THROW(purchase_cost(bom), ValidationError);
  bom.c2m.reset();
  bom.pcie = 6;
  EXPECT_THROW(purchase_cost(bom), ValidationError);
}

TEST(Costing, FreeEnergyLeavesHardwareOnly) {
  BillOfMaterials bom{.gpu = 3600};
  DeploymentEconomics econ{.runtime_hours = 1, .energy_price_per_kwh = 0, .token_throughput = 1};
  EXPECT_DOUBLE_EQ(cost_per_token(bom, PowerProfile{.gpu = 1000}, econ), 1.0);
}

TEST(Costing, CostFallsWithThroughput) {
  BillOfMaterials bom{.gpu = 5000};
  PowerProfile p{.gpu = 300};
  DeploymentEconomics e{.runtime_hours = 100, .energy_price_per_kwh = 0.2, .token_throughput = 10};
  const double slow = cost_per_token(bom, p, e);
  e.token_throughput = 20;
  EXPECT_NEAR(cost_per_token(bom, p, e), slow / 2, 1e-18);
}

TEST(Costing, Validation) {
  EXPECT_THROW(purchase_cost(BillOfMaterials{.gpu = -1}), ValidationError);
  EXPECT_THROW(cost_per_token({}, {}, {.runtime_hours = 0, .energy_price_per_kwh = 0.1, .token_throughput = 1}),
               ValidationError);
  EXPECT_THROW(cost_per_token({}, {}, {.runtime_hours = 1, .energy_price_per_kwh = 0.1, .token_throughput = 0}),
               ValidationError);
  EXPECT_THROW(power_from_tdp(100, 100, 1.5), ValidationError);
}

TEST(Costing, PowerFromTdpDefault) {
  const auto p = power_from_tdp(700, 300);
  EXPECT_DOUBLE_EQ(p.total_watts(), 600.0);
}

TEST(Costing, ServerDeltaIsTwentyThousand) {
  const auto full = load_cost_inputs_file(testing_util::source_path("inputs/server_gpu_only_full.json"));
  const auto reduced = load_cost_inputs_file(testing_util::source_path("inputs/server_gpu_only_reduced.json"));
  EXPECT_DOUBLE_EQ(purchase_cost(full.bom), 176000.0);
  EXPECT_DOUBLE_EQ(purchase_cost(full.bom) - purchase_cost(reduced.bom), 20000.0);
  EXPECT_DOUBLE_EQ(full.power.total_watts(), 0.6 * (3200 + 720));
}

TEST(Costing, JsonInputs) {
  const auto in = load_cost_inputs_file(testing_util::source_path("inputs/cost_example.json"));
  const auto b = cost_breakdown(in);
  EXPECT_DOUBLE_EQ(b.hardware_usd, 10000.0);
  EXPECT_DOUBLE_EQ(b.power_watts, 500.0);
  EXPECT_NEAR(b.cost_per_token, 3.31e-7, 0.005e-7);
  auto j = to_json(in);
  j["bom"]["gold_plating"] = 1;
  EXPECT_THROW(cost_inputs_from_json(j), ValidationError);
}

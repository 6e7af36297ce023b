#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "moecap/error.hpp"
#include "moecap/routing.hpp"

using namespace moecap;

namespace {

ModelDescriptor routed_model(std::uint32_t e, std::uint32_t k) {
  auto d = testing_util::toy_descriptor(1);
  d.name = "routed";
  d.n_expert = e;
  d.top_k = k;
  validate(d);
  return d;
}

}  // namespace

TEST(Routing, ClosedFormUniform) {
  const auto r = expected_distinct_experts(64, 8, 8, RoutingDistribution::uniform());
  EXPECT_NEAR(r.mean, 64 * (1 - std::pow(7.0 / 8, 8)), 1e-12);
  EXPECT_NEAR(r.mean, 42.009, 0.001);
  EXPECT_EQ(r.method, ExpectationMethod::closed_form);
  EXPECT_DOUBLE_EQ(expected_distinct_experts(8, 2, 1, RoutingDistribution::uniform()).mean, 2.0);
}

TEST(Routing, EnumerationMatchesClosedFormOnUniformWeights) {
  for (std::uint32_t e : {4u, 8u, 12u}) {
    for (std::uint32_t k : {1u, 2u, 3u}) {
      const auto dist = RoutingDistribution::empirical(std::vector<double>(e, 1.0 / e));
      for (std::uint64_t b : {1u, 3u, 16u}) {
        const auto en = expected_distinct_experts(e, k, b, dist);
        const auto cf = expected_distinct_experts(e, k, b, RoutingDistribution::uniform());
        EXPECT_EQ(en.method, ExpectationMethod::enumeration);
        EXPECT_NEAR(en.mean, cf.mean, 1e-9) << e << " " << k << " " << b;
      }
    }
  }
}

TEST(Routing, AbsenceProbabilitiesBySequentialDraws) {
  // Two draws from {0.5, 0.3, 0.2}: expert 2 is absent iff {0,1} is drawn,
  // 0.5*0.3/0.5 + 0.3*0.5/0.7.
  const auto q = expert_absence_probabilities(3, 2, {0.5, 0.3, 0.2});
  EXPECT_NEAR(q[2], 0.5 * 0.6 + 0.3 * (0.5 / 0.7), 1e-12);
  double sum = 0;
  for (double v : q) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);  // exactly one expert absent per draw
}

TEST(Routing, ExhaustedSupportFallsBackToUniform) {
  const auto dist = RoutingDistribution::empirical({1.0, 0.0, 0.0, 0.0});
  TopKSampler s(4, 3, dist);
  std::mt19937_64 rng(1);
  ExpertSet set(4);
  s.sample(rng, set);
  EXPECT_EQ(set.count(), 3u);
  EXPECT_TRUE(set.test(0));
  const auto q = expert_absence_probabilities(4, 3, dist.probabilities(4));
  EXPECT_NEAR(q[0], 0.0, 1e-15);
  EXPECT_NEAR(q[1], 1.0 / 3, 1e-12);
}

TEST(Routing, SamplerDrawsExactlyTopKDistinct) {
  for (auto dist : {RoutingDistribution::uniform(), RoutingDistribution::zipf(1.2)}) {
    TopKSampler s(64, 8, dist);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      ExpertSet set(64);
      s.sample(rng, set);
      EXPECT_EQ(set.count(), 8u);
    }
  }
}

TEST(Routing, EmpiricalLengthMismatch) {
  const auto dist = RoutingDistribution::empirical({0.5, 0.5});
  EXPECT_THROW(dist.probabilities(3), ValidationError);
  EXPECT_THROW(RoutingDistribution::empirical({0.5, 0.6}), ValidationError);
  EXPECT_THROW(RoutingDistribution::parse("zipf:x"), ValidationError);
  EXPECT_THROW(RoutingDistribution::parse("gaussian"), ValidationError);
}

TEST(Routing, SimulationIsDeterministic) {
  const auto d = routed_model(16, 2);
  SimulationConfig c;
  c.batch = 4;
  c.n_passes = 20;
  c.seed = 99;
  const auto a = serialize_activation_sheet(simulate_routing(d, RoutingDistribution::zipf(1.0), c));
  const auto b = serialize_activation_sheet(simulate_routing(d, RoutingDistribution::zipf(1.0), c));
  EXPECT_EQ(a, b);
  c.seed = 100;
  EXPECT_NE(a, serialize_activation_sheet(simulate_routing(d, RoutingDistribution::zipf(1.0), c)));
}

TEST(Routing, SimulatedSheetsValidate) {
  const auto d = routed_model(12, 3);
  SimulationConfig c;
  c.batch = 5;
  c.n_passes = 10;
  c.seed = 1;
  c.phase = Phase::prefill;
  c.prompt_len = 3;
  const auto s = simulate_routing(d, RoutingDistribution::uniform(), c);
  EXPECT_NO_THROW(validate(s, d));
  EXPECT_EQ(s.passes[0].tokens_processed, 15u);
  EXPECT_EQ(s.expert_slots, 12u);
}

TEST(Routing, NestedBatchesActivateSupersets) {
  const auto d = routed_model(64, 8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimulationConfig small{.batch = 2, .n_passes = 3, .seed = seed};
    SimulationConfig large{.batch = 9, .n_passes = 3, .seed = seed};
    const auto a = simulate_routing(d, RoutingDistribution::zipf(0.8), small);
    const auto b = simulate_routing(d, RoutingDistribution::zipf(0.8), large);
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t l = 0; l < a.passes[p].activated.size(); ++l) {
        EXPECT_TRUE(a.passes[p].activated[l].experts.is_subset_of(b.passes[p].activated[l].experts));
      }
    }
  }
}

TEST(Routing, MonteCarloAboveEnumerationLimit) {
  ExpectationOptions o;
  o.mc_batches = 4000;
  const auto r = expected_distinct_experts(32, 4, 4, RoutingDistribution::zipf(1.0), o);
  EXPECT_EQ(r.method, ExpectationMethod::monte_carlo);
  EXPECT_GT(r.variance, 0.0);
  EXPECT_GT(r.mean, 4.0);
  EXPECT_LT(r.mean, 16.0);
}

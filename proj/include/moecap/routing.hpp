#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "moecap/model.hpp"
#include "moecap/trace.hpp"

namespace moecap {

// Per-token routing distribution over the routed experts of a layer.
class RoutingDistribution {
 public:
  enum class Kind { uniform, zipf, empirical };

  static RoutingDistribution uniform() { return RoutingDistribution(Kind::uniform, 0.0, {}); }
  // Weight of expert i proportional to (i + 1)^-s.
  static RoutingDistribution zipf(double exponent);
  // Non-negative weights summing to 1 (within 1e-9).
  static RoutingDistribution empirical(std::vector<double> weights);
  // "uniform", "zipf:<s>"; empirical distributions come from files.
  static RoutingDistribution parse(const std::string& text);

  Kind kind() const noexcept { return kind_; }
  double zipf_exponent() const noexcept { return exponent_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::string describe() const;

  // Normalized per-expert probabilities. Throws ValidationError when an
  // empirical vector's length differs from n_expert.
  std::vector<double> probabilities(std::uint32_t n_expert) const;

 private:
  RoutingDistribution(Kind kind, double exponent, std::vector<double> weights)
      : kind_(kind), exponent_(exponent), weights_(std::move(weights)) {}

  Kind kind_;
  double exponent_;
  std::vector<double> weights_;
};

// Draws one token's routed experts: top_k distinct experts by sequential
// weighted draws without replacement, renormalizing after each draw. Uses a
// fixed number of generator calls per token.
class TopKSampler {
 public:
  TopKSampler(std::uint32_t n_expert, std::uint32_t top_k, const RoutingDistribution& dist);

  void sample(std::mt19937_64& rng, ExpertSet& into) const;
  std::uint32_t n_expert() const noexcept { return n_expert_; }
  std::uint32_t top_k() const noexcept { return top_k_; }

 private:
  std::uint32_t n_expert_;
  std::uint32_t top_k_;
  bool uniform_;
  std::vector<double> probs_;
};

struct SimulationConfig {
  std::uint64_t batch = 1;
  std::uint64_t n_passes = 1;
  std::uint64_t seed = 0;
  Phase phase = Phase::decode;
  std::uint64_t prompt_len = 1;  // tokens per sequence for prefill passes
  // Fills latency_s; 1.0 when empty.
  std::function<double(const ForwardPassRecord&)> latency_model;
};

// Seed of pass `index` derived from the master seed (SplitMix64 finalizer over
// seed + (index + 1) * golden ratio). Independent of evaluation order.
std::uint64_t pass_seed(std::uint64_t master_seed, std::uint64_t pass_index);

// Tokens of a pass are routed in order from one generator seeded with
// pass_seed(), so a smaller batch under the same seed routes a prefix of a
// larger batch's tokens identically.
ActivationSheet simulate_routing(const ModelDescriptor& desc, const RoutingDistribution& dist,
                                 const SimulationConfig& config);

enum class ExpectationMethod { closed_form, enumeration, monte_carlo };

struct DistinctExpectation {
  double mean = 0.0;
  double variance = 0.0;  // variance of the estimate; 0 for exact methods
  ExpectationMethod method = ExpectationMethod::closed_form;
};

struct ExpectationOptions {
  std::uint32_t enumeration_limit = 20;  // enumerate when n_expert <= limit
  std::uint64_t mc_batches = 20000;
  std::uint64_t seed = 0x5eed;
};

// Expected number of distinct routed experts a batch of independent tokens
// activates in one layer. Uniform: closed form. Otherwise sum over experts of
// 1 - q_i^batch, with q_i (expert i absent from one token's draw) enumerated
// over all top_k subsets, or a Monte-Carlo estimate for large n_expert.
DistinctExpectation expected_distinct_experts(std::uint32_t n_expert, std::uint32_t top_k, std::uint64_t batch,
                                              const RoutingDistribution& dist, ExpectationOptions opts = {});

// q_i for every expert by exact enumeration of top_k subsets (n_expert <= 24).
std::vector<double> expert_absence_probabilities(std::uint32_t n_expert, std::uint32_t top_k,
                                                 const std::vector<double>& probs);

}  // namespace moecap

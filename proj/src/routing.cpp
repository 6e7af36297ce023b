#include "moecap/routing.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "moecap/error.hpp"

namespace moecap {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform double in [0, 1) from the top 53 bits; portable across standard
// libraries, unlike std::uniform_real_distribution.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint32_t below(std::mt19937_64& rng, std::uint32_t n) {
  const auto v = static_cast<std::uint32_t>(unit(rng) * n);
  return v < n ? v : n - 1;
}

}  // namespace

RoutingDistribution RoutingDistribution::zipf(double exponent) {
  if (!(exponent >= 0.0) || !std::isfinite(exponent))
    throw ValidationError("zipf", "exponent must be finite and >= 0");
  return RoutingDistribution(Kind::zipf, exponent, {});
}

RoutingDistribution RoutingDistribution::empirical(std::vector<double> weights) {
  if (weights.empty()) throw ValidationError("weights", "empirical distribution needs at least one weight");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights", "weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("weights", "weights must sum to 1 (sum is " + std::to_string(sum) + ")");
  return RoutingDistribution(Kind::empirical, 0.0, std::move(weights));
}

RoutingDistribution RoutingDistribution::parse(const std::string& text) {
  if (text == "uniform") return uniform();
  if (text.starts_with("zipf:")) {
    try {
      std::size_t used = 0;
      const double s = std::stod(text.substr(5), &used);
      if (used != text.size() - 5) throw std::invalid_argument("trailing characters");
      return zipf(s);
    } catch (const std::logic_error&) {
      throw ValidationError("dist", "malformed zipf exponent in '" + text + "'");
    }
  }
  throw ValidationError("dist", "unknown distribution '" + text + "' (expected uniform or zipf:<s>)");
}

std::string RoutingDistribution::describe() const {
  switch (kind_) {
    case Kind::uniform: return "uniform";
    case Kind::zipf: {
      std::ostringstream s;
      s << "zipf:" << exponent_;
      return s.str();
    }
    case Kind::empirical: return "empirical[" + std::to_string(weights_.size()) + "]";
  }
  return "unknown";
}

std::vector<double> RoutingDistribution::probabilities(std::uint32_t n_expert) const {
  std::vector<double> p(n_expert);
  switch (kind_) {
    case Kind::uniform:
      std::fill(p.begin(), p.end(), 1.0 / n_expert);
      break;
    case Kind::zipf: {
      double sum = 0.0;
      for (std::uint32_t i = 0; i < n_expert; ++i) sum += p[i] = std::pow(i + 1.0, -exponent_);
      for (auto& v : p) v /= sum;
      break;
    }
    case Kind::empirical:
      if (weights_.size() != n_expert)
        throw ValidationError("weights", "empirical distribution has " + std::to_string(weights_.size()) +
                                             " weights but the model has " + std::to_string(n_expert) + " experts");
      p = weights_;
      break;
  }
  return p;
}

TopKSampler::TopKSampler(std::uint32_t n_expert, std::uint32_t top_k, const RoutingDistribution& dist)
    : n_expert_(n_expert), top_k_(top_k), uniform_(dist.kind() == RoutingDistribution::Kind::uniform) {
  if (n_expert < 1) throw ValidationError("n_expert", "must be >= 1");
  if (top_k < 1 || top_k > n_expert) throw ValidationError("top_k", "must satisfy 1 <= top_k <= n_expert");
  probs_ = dist.probabilities(n_expert);
}

void TopKSampler::sample(std::mt19937_64& rng, ExpertSet& into) const {
  if (uniform_) {
    // Floyd's algorithm: a uniform k-subset with exactly k draws.
    std::vector<std::uint64_t> chosen((n_expert_ + 63) / 64, 0);
    auto has = [&](std::uint32_t i) { return (chosen[i / 64] >> (i % 64)) & 1u; };
    for (std::uint32_t j = n_expert_ - top_k_; j < n_expert_; ++j) {
      std::uint32_t t = below(rng, j + 1);
      if (has(t)) t = j;
      chosen[t / 64] |= std::uint64_t{1} << (t % 64);
      into.set(t);
    }
    return;
  }

  std::vector<double> remaining = probs_;
  std::vector<char> taken(n_expert_, 0);
  for (std::uint32_t draw = 0; draw < top_k_; ++draw) {
    const double u = unit(rng);
    double total = 0.0;
    for (std::uint32_t i = 0; i < n_expert_; ++i) total += remaining[i];

    std::uint32_t pick = n_expert_;
    if (total > 0.0) {
      const double target = u * total;
      double acc = 0.0;
      for (std::uint32_t i = 0; i < n_expert_; ++i) {
        if (remaining[i] <= 0.0) continue;
        acc += remaining[i];
        pick = i;
        if (target < acc) break;
      }
    } else {
      // Support exhausted: fall back to a uniform pick among untaken experts.
      const std::uint32_t free_count = n_expert_ - draw;
      std::uint32_t nth = static_cast<std::uint32_t>(u * free_count);
      if (nth >= free_count) nth = free_count - 1;
      for (std::uint32_t i = 0; i < n_expert_; ++i) {
        if (taken[i]) continue;
        if (nth-- == 0) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = 1;
    remaining[pick] = 0.0;
    into.set(pick);
  }
}

std::uint64_t pass_seed(std::uint64_t master_seed, std::uint64_t pass_index) {
  return splitmix64(master_seed + (pass_index + 1) * 0x9E3779B97F4A7C15ull);
}

ActivationSheet simulate_routing(const ModelDescriptor& desc, const RoutingDistribution& dist,
                                 const SimulationConfig& config) {
  if (config.batch < 1) throw ValidationError("batch", "must be >= 1");
  if (config.n_passes < 1) throw ValidationError("n_passes", "must be >= 1");
  if (config.phase == Phase::prefill && config.prompt_len < 1) throw ValidationError("prompt_len", "must be >= 1");

  const TopKSampler sampler(desc.n_expert, desc.top_k, dist);
  const std::size_t slots = ((desc.n_expert + 3) / 4) * 4;

  ActivationSheet sheet;
  sheet.model_name = desc.name;
  sheet.expert_slots = slots;
  sheet.passes.reserve(config.n_passes);

  std::vector<std::uint32_t> moe_layers;
  for (std::uint32_t l = 0; l < desc.n_layer; ++l) {
    if (desc.is_moe_layer(l)) moe_layers.push_back(l);
  }

  for (std::uint64_t pass = 0; pass < config.n_passes; ++pass) {
    ForwardPassRecord rec;
    rec.pass_id = pass;
    rec.phase = config.phase;
    rec.batch_size = config.batch;
    rec.tokens_processed = config.phase == Phase::decode ? config.batch : config.batch * config.prompt_len;
    for (auto l : moe_layers) rec.activated.push_back({l, ExpertSet(slots)});

    std::mt19937_64 rng(pass_seed(config.seed, pass));
    for (std::uint64_t token = 0; token < rec.tokens_processed; ++token) {
      for (auto& la : rec.activated) sampler.sample(rng, la.experts);
    }
    rec.latency_s = config.latency_model ? config.latency_model(rec) : 1.0;
    sheet.passes.push_back(std::move(rec));
  }
  return sheet;
}

std::vector<double> expert_absence_probabilities(std::uint32_t n_expert, std::uint32_t top_k,
                                                 const std::vector<double>& probs) {
  if (n_expert > 24) throw ValidationError("n_expert", "enumeration supports at most 24 experts");
  if (top_k < 1 || top_k > n_expert) throw ValidationError("top_k", "must satisfy 1 <= top_k <= n_expert");
  if (probs.size() != n_expert) throw ValidationError("weights", "probability vector length mismatch");

  // prob[mask]: probability that the first popcount(mask) draws are exactly
  // the experts in mask (any order).
  const std::size_t n_masks = std::size_t{1} << n_expert;
  std::vector<double> prob(n_masks, 0.0);
  prob[0] = 1.0;
  std::vector<double> absent(n_expert, 0.0);

  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    const double pm = prob[mask];
    if (pm == 0.0) continue;
    const auto drawn = static_cast<std::uint32_t>(std::popcount(mask));
    if (drawn == top_k) {
      for (std::uint32_t i = 0; i < n_expert; ++i) {
        if (!(mask >> i & 1u)) absent[i] += pm;
      }
      continue;
    }
    // Mirrors TopKSampler: exhausted support falls back to a uniform pick.
    double left_weight = 0.0;
    for (std::uint32_t i = 0; i < n_expert; ++i) {
      if (!(mask >> i & 1u)) left_weight += probs[i];
    }
    const bool exhausted = !(left_weight > 0.0);
    for (std::uint32_t i = 0; i < n_expert; ++i) {
      if (mask >> i & 1u) continue;
      const double step = exhausted ? 1.0 / (n_expert - drawn) : probs[i] / left_weight;
      if (step > 0.0) prob[mask | (std::size_t{1} << i)] += pm * step;
    }
  }
  return absent;
}

DistinctExpectation expected_distinct_experts(std::uint32_t n_expert, std::uint32_t top_k, std::uint64_t batch,
                                              const RoutingDistribution& dist, ExpectationOptions opts) {
  if (n_expert < 1) throw ValidationError("n_expert", "must be >= 1");
  if (top_k < 1 || top_k > n_expert) throw ValidationError("top_k", "must satisfy 1 <= top_k <= n_expert");
  if (batch < 1) throw ValidationError("batch", "must be >= 1");

  DistinctExpectation out;
  if (dist.kind() == RoutingDistribution::Kind::uniform) {
    const double miss = 1.0 - static_cast<double>(top_k) / n_expert;
    out.mean = n_expert * (1.0 - std::pow(miss, static_cast<double>(batch)));
    out.method = ExpectationMethod::closed_form;
    return out;
  }

  const auto probs = dist.probabilities(n_expert);
  if (n_expert <= opts.enumeration_limit) {
    const auto absent = expert_absence_probabilities(n_expert, top_k, probs);
    for (double q : absent) out.mean += 1.0 - std::pow(q, static_cast<double>(batch));
    out.method = ExpectationMethod::enumeration;
    return out;
  }

  const TopKSampler sampler(n_expert, top_k, dist);
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t b = 0; b < opts.mc_batches; ++b) {
    std::mt19937_64 rng(pass_seed(opts.seed, b));
    ExpertSet set(n_expert);
    for (std::uint64_t t = 0; t < batch; ++t) sampler.sample(rng, set);
    const auto c = static_cast<double>(set.count());
    sum += c;
    sum_sq += c * c;
  }
  const double n = static_cast<double>(opts.mc_batches);
  out.mean = sum / n;
  const double sample_var = n > 1 ? (sum_sq - n * out.mean * out.mean) / (n - 1) : 0.0;
  out.variance = std::max(0.0, sample_var) / n;
  out.method = ExpectationMethod::monte_carlo;
  return out;
}

}  // namespace moecap

#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include "moecap/model.hpp"
#include "moecap/trace.hpp"

namespace testing_util {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(MOECAP_SOURCE_DIR) / rel;
}

// embed=1e6, 2 MoE layers, attn=2e6/layer, 4 experts x 1e6, router=1e4.
inline moecap::ModelDescriptor toy_descriptor(std::uint32_t top_k = 2) {
  moecap::ModelDescriptor d;
  d.name = "toy";
  d.n_layer = 2;
  d.moe_layer_mask = {true, true};
  d.d_model = 256;
  d.n_heads = 4;
  d.n_kv_heads = 4;
  d.head_dim = 64;
  d.n_expert = 4;
  d.top_k = top_k;
  d.params_expert = 1'000'000;
  d.params_router = 10'000;
  d.params_attn_layer = 2'000'000;
  d.params_embed = 1'000'000;
  moecap::validate(d);
  return d;
}

// Dense model as one always-selected expert with random sizes.
inline moecap::ModelDescriptor random_dense(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> size(1, 5'000'000);
  std::uniform_int_distribution<std::uint32_t> layers(1, 8);
  moecap::ModelDescriptor d;
  d.name = "dense";
  d.n_layer = layers(rng);
  d.moe_layer_mask.assign(d.n_layer, true);
  d.d_model = 64 * (1 + rng() % 16);
  d.n_heads = 4;
  d.n_kv_heads = 1 + rng() % 4;
  d.head_dim = 32;
  d.n_expert = 1;
  d.top_k = 1;
  d.params_expert = size(rng);
  d.params_router = rng() % 2 ? 0 : d.d_model;
  d.params_attn_layer = size(rng);
  d.params_embed = size(rng);
  moecap::validate(d);
  return d;
}

// Random valid sheet for `desc`.
inline moecap::ActivationSheet random_sheet(const moecap::ModelDescriptor& desc, std::mt19937_64& rng,
                                            std::size_t passes) {
  moecap::ActivationSheet s;
  s.model_name = desc.name;
  s.expert_slots = ((desc.n_expert + 3) / 4) * 4;
  std::uniform_real_distribution<double> lat(1e-4, 0.5);
  for (std::size_t i = 0; i < passes; ++i) {
    moecap::ForwardPassRecord p;
    p.pass_id = i;
    p.phase = rng() % 4 == 0 ? moecap::Phase::prefill : moecap::Phase::decode;
    p.batch_size = 1 + rng() % 32;
    p.tokens_processed = p.phase == moecap::Phase::decode ? p.batch_size : p.batch_size * (1 + rng() % 64);
    p.latency_s = lat(rng);
    p.kv_bytes_read = rng() % 3 == 0 ? 0 : rng() % 100'000'000;
    for (std::uint32_t l = 0; l < desc.n_layer; ++l) {
      if (!desc.is_moe_layer(l)) continue;
      moecap::ExpertSet e(s.expert_slots);
      const std::uint64_t hi = std::min<std::uint64_t>(desc.n_expert, p.tokens_processed * desc.top_k);
      const std::uint64_t want = desc.top_k + rng() % (hi - desc.top_k + 1);
      std::vector<std::uint32_t> ids(desc.n_expert);
      for (std::uint32_t k = 0; k < desc.n_expert; ++k) ids[k] = k;
      std::shuffle(ids.begin(), ids.end(), rng);
      for (std::uint64_t k = 0; k < want; ++k) e.set(ids[k]);
      p.activated.push_back({l, e});
    }
    s.passes.push_back(std::move(p));
  }
  return s;
}

}  // namespace testing_util

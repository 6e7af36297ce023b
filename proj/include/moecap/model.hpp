#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "moecap/precision.hpp"

namespace moecap {

// Architecture and parameter accounting of one MoE model. All parameter
// counts are exact per-component counts, not rounded totals.
struct ModelDescriptor {
  std::string name;
  std::uint32_t n_layer = 0;
  std::vector<bool> moe_layer_mask;  // true = MoE FFN, false = dense FFN

  std::uint64_t d_model = 0;
  std::uint64_t n_heads = 0;
  std::uint64_t n_kv_heads = 0;
  std::uint64_t head_dim = 0;

  std::uint32_t n_expert = 0;  // routed experts per MoE layer
  std::uint32_t top_k = 0;
  std::uint32_t n_shared = 0;

  std::uint64_t params_expert = 0;
  std::uint64_t params_shared_expert = 0;
  std::uint64_t params_router = 0;  // per MoE layer
  std::uint64_t params_attn_layer = 0;
  std::uint64_t params_dense_ffn = 0;
  std::uint64_t params_embed = 0;

  // KV-cache element width; weights' precision is used when absent.
  std::optional<Precision> kv_precision;
  // Free-form provenance and counting assumptions.
  std::string notes;

  // Filled by validation; equals total_params(*this).
  std::uint64_t total_params = 0;

  bool is_moe_layer(std::size_t layer) const { return moe_layer_mask.at(layer); }
  std::uint32_t moe_layer_count() const;
  // Routed plus shared experts touched per token in each MoE layer.
  std::uint32_t experts_per_token() const { return top_k + n_shared; }
  bool has_heterogeneous_experts() const { return n_shared > 0 && params_shared_expert != params_expert; }
};

// Controls whether embedding/output-head parameters are part of the byte and
// parameter accounting. Literal per-layer accounting excludes them.
struct AccountingOptions {
  bool include_embeddings = true;
};

// Throws ValidationError naming the offending field. Also sets total_params.
void validate(ModelDescriptor& desc);

ModelDescriptor model_descriptor_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ModelDescriptor& desc);
ModelDescriptor load_model_descriptor(std::istream& in);
ModelDescriptor load_model_descriptor_file(const std::filesystem::path& path);

// Parameter counts.
std::uint64_t total_params(const ModelDescriptor& desc, AccountingOptions opts = {});
// Everything that is read regardless of routing: embeddings, attention,
// routers, shared experts and dense FFN layers.
std::uint64_t always_active_params(const ModelDescriptor& desc, AccountingOptions opts = {});
// Batch-size-1 closed form: each MoE layer touches top_k routed experts.
std::uint64_t active_params_analytic(const ModelDescriptor& desc, AccountingOptions opts = {});

// Byte views of the counts above (S_model and the batch-1 S_activated).
double total_param_bytes(const ModelDescriptor& desc, Precision prec, AccountingOptions opts = {});
double active_param_bytes_analytic(const ModelDescriptor& desc, Precision prec, AccountingOptions opts = {});

// Attention FLOPs per token: projections (2 x params) plus score and
// value-weighting terms (4 x n_layer x seq_len x d_model).
double attention_flops_per_token(const ModelDescriptor& desc, std::uint64_t seq_len);
// Routed experts at params_expert, shared experts at params_shared_expert,
// routers, dense FFN layers at 2 x params_dense_ffn.
double sparse_flops_per_token(const ModelDescriptor& desc, std::uint64_t seq_len);
// Same accounting with every routed expert participating.
double dense_flops_per_token(const ModelDescriptor& desc, std::uint64_t seq_len);

// 2 x n_layer x n_kv_heads x head_dim x seq_len x batch x bytes.
double kv_cache_bytes(const ModelDescriptor& desc, std::uint64_t seq_len, std::uint64_t batch, Precision prec);

}  // namespace moecap

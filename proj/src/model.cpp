#include "moecap/model.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "moecap/error.hpp"

namespace moecap {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "name",           "n_layer",          "moe_layer_mask",       "d_model",       "n_heads",
      "n_kv_heads",     "head_dim",         "n_expert",             "top_k",         "n_shared",
      "params_expert",  "params_shared_expert", "params_router",    "params_attn_layer",
      "params_dense_ffn", "params_embed",   "kv_precision",         "notes",         "total_params"};
  return keys;
}

const nlohmann::json& require(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(key, "missing required field");
  return *it;
}

std::uint64_t count_field(const nlohmann::json& doc, const char* key) {
  const auto& v = require(doc, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) throw ValidationError(key, "must be >= 0");
  throw ValidationError(key, "must be a non-negative integer");
}

std::uint32_t small_count_field(const nlohmann::json& doc, const char* key) {
  auto v = count_field(doc, key);
  if (v > 0xFFFFFFFFu) throw ValidationError(key, "value out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::uint32_t ModelDescriptor::moe_layer_count() const {
  return static_cast<std::uint32_t>(std::count(moe_layer_mask.begin(), moe_layer_mask.end(), true));
}

void validate(ModelDescriptor& desc) {
  if (desc.name.empty()) throw ValidationError("name", "must be non-empty");
  if (desc.n_layer < 1) throw ValidationError("n_layer", "must be >= 1");
  if (desc.moe_layer_mask.size() != desc.n_layer)
    throw ValidationError("moe_layer_mask", "length " + std::to_string(desc.moe_layer_mask.size()) +
                                                " does not match n_layer " + std::to_string(desc.n_layer));
  if (desc.n_expert < 1) throw ValidationError("n_expert", "must be >= 1");
  if (desc.top_k < 1) throw ValidationError("top_k", "must be >= 1");
  if (desc.top_k > desc.n_expert)
    throw ValidationError("top_k", "top_k " + std::to_string(desc.top_k) + " exceeds n_expert " +
                                       std::to_string(desc.n_expert));
  desc.total_params = total_params(desc);
}

ModelDescriptor model_descriptor_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("", "model descriptor must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!known_keys().contains(key)) throw ValidationError(key, "unknown key");
  }

  ModelDescriptor d;
  const auto& name = require(doc, "name");
  if (!name.is_string()) throw ValidationError("name", "must be a string");
  d.name = name.get<std::string>();
  d.n_layer = small_count_field(doc, "n_layer");

  const auto& mask = require(doc, "moe_layer_mask");
  if (!mask.is_array()) throw ValidationError("moe_layer_mask", "must be an array of booleans");
  for (const auto& m : mask) {
    if (!m.is_boolean()) throw ValidationError("moe_layer_mask", "must be an array of booleans");
    d.moe_layer_mask.push_back(m.get<bool>());
  }

  d.d_model = count_field(doc, "d_model");
  d.n_heads = count_field(doc, "n_heads");
  d.n_kv_heads = count_field(doc, "n_kv_heads");
  d.head_dim = count_field(doc, "head_dim");
  d.n_expert = small_count_field(doc, "n_expert");
  d.top_k = small_count_field(doc, "top_k");
  d.n_shared = small_count_field(doc, "n_shared");
  d.params_expert = count_field(doc, "params_expert");
  d.params_shared_expert = count_field(doc, "params_shared_expert");
  d.params_router = count_field(doc, "params_router");
  d.params_attn_layer = count_field(doc, "params_attn_layer");
  d.params_dense_ffn = count_field(doc, "params_dense_ffn");
  d.params_embed = count_field(doc, "params_embed");

  if (auto it = doc.find("kv_precision"); it != doc.end()) {
    if (it->is_string()) {
      d.kv_precision = Precision::parse(it->get<std::string>());
    } else if (it->is_number()) {
      d.kv_precision = Precision::parse(it->dump());
    } else {
      throw ValidationError("kv_precision", "must be a precision name or byte count");
    }
  }
  if (auto it = doc.find("notes"); it != doc.end()) {
    if (!it->is_string()) throw ValidationError("notes", "must be a string");
    d.notes = it->get<std::string>();
  }

  validate(d);

  if (doc.contains("total_params")) {
    auto stated = count_field(doc, "total_params");
    if (stated != d.total_params)
      throw ValidationError("total_params", "stated " + std::to_string(stated) + " but components sum to " +
                                                std::to_string(d.total_params));
  }
  return d;
}

nlohmann::json to_json(const ModelDescriptor& d) {
  nlohmann::json doc = nlohmann::json::object();
  doc["name"] = d.name;
  doc["n_layer"] = d.n_layer;
  doc["moe_layer_mask"] = nlohmann::json::array();
  for (bool m : d.moe_layer_mask) doc["moe_layer_mask"].push_back(m);
  doc["d_model"] = d.d_model;
  doc["n_heads"] = d.n_heads;
  doc["n_kv_heads"] = d.n_kv_heads;
  doc["head_dim"] = d.head_dim;
  doc["n_expert"] = d.n_expert;
  doc["top_k"] = d.top_k;
  doc["n_shared"] = d.n_shared;
  doc["params_expert"] = d.params_expert;
  doc["params_shared_expert"] = d.params_shared_expert;
  doc["params_router"] = d.params_router;
  doc["params_attn_layer"] = d.params_attn_layer;
  doc["params_dense_ffn"] = d.params_dense_ffn;
  doc["params_embed"] = d.params_embed;
  if (d.kv_precision) doc["kv_precision"] = d.kv_precision->name();
  if (!d.notes.empty()) doc["notes"] = d.notes;
  doc["total_params"] = total_params(d);
  return doc;
}

ModelDescriptor load_model_descriptor(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("", std::string("malformed model descriptor: ") + e.what());
  }
  return model_descriptor_from_json(doc);
}

ModelDescriptor load_model_descriptor_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model", "cannot open " + path.string());
  return load_model_descriptor(in);
}

std::uint64_t total_params(const ModelDescriptor& d, AccountingOptions opts) {
  std::uint64_t sum = opts.include_embeddings ? d.params_embed : 0;
  for (std::size_t l = 0; l < d.moe_layer_mask.size(); ++l) {
    sum += d.params_attn_layer;
    if (d.moe_layer_mask[l]) {
      sum += d.params_router + std::uint64_t{d.n_expert} * d.params_expert +
             std::uint64_t{d.n_shared} * d.params_shared_expert;
    } else {
      sum += d.params_dense_ffn;
    }
  }
  return sum;
}

std::uint64_t always_active_params(const ModelDescriptor& d, AccountingOptions opts) {
  std::uint64_t sum = opts.include_embeddings ? d.params_embed : 0;
  for (std::size_t l = 0; l < d.moe_layer_mask.size(); ++l) {
    sum += d.params_attn_layer;
    if (d.moe_layer_mask[l]) {
      sum += d.params_router + std::uint64_t{d.n_shared} * d.params_shared_expert;
    } else {
      sum += d.params_dense_ffn;
    }
  }
  return sum;
}

std::uint64_t active_params_analytic(const ModelDescriptor& d, AccountingOptions opts) {
  return always_active_params(d, opts) + std::uint64_t{d.moe_layer_count()} * d.top_k * d.params_expert;
}

double total_param_bytes(const ModelDescriptor& desc, Precision prec, AccountingOptions opts) {
  return prec.bytes(total_params(desc, opts));
}

double active_param_bytes_analytic(const ModelDescriptor& desc, Precision prec, AccountingOptions opts) {
  return prec.bytes(active_params_analytic(desc, opts));
}

double attention_flops_per_token(const ModelDescriptor& d, std::uint64_t seq_len) {
  if (seq_len < 1) throw ValidationError("seq_len", "must be >= 1");
  const double projections = 2.0 * static_cast<double>(d.params_attn_layer) * d.n_layer;
  const double scores = 4.0 * d.n_layer * static_cast<double>(seq_len) * static_cast<double>(d.d_model);
  return projections + scores;
}

namespace {

double ffn_flops(const ModelDescriptor& d, std::uint64_t routed_per_token) {
  double sum = 0.0;
  for (bool moe : d.moe_layer_mask) {
    if (moe) {
      sum += 2.0 * static_cast<double>(d.params_router) +
             2.0 * static_cast<double>(routed_per_token * d.params_expert) +
             2.0 * static_cast<double>(std::uint64_t{d.n_shared} * d.params_shared_expert);
    } else {
      sum += 2.0 * static_cast<double>(d.params_dense_ffn);
    }
  }
  return sum;
}

}  // namespace

double sparse_flops_per_token(const ModelDescriptor& d, std::uint64_t seq_len) {
  return attention_flops_per_token(d, seq_len) + ffn_flops(d, d.top_k);
}

double dense_flops_per_token(const ModelDescriptor& d, std::uint64_t seq_len) {
  return attention_flops_per_token(d, seq_len) + ffn_flops(d, d.n_expert);
}

double kv_cache_bytes(const ModelDescriptor& d, std::uint64_t seq_len, std::uint64_t batch, Precision prec) {
  if (seq_len < 1) throw ValidationError("seq_len", "must be >= 1");
  if (batch < 1) throw ValidationError("batch", "must be >= 1");
  const Precision kv = d.kv_precision.value_or(prec);
  const double elements = 2.0 * d.n_layer * static_cast<double>(d.n_kv_heads) * static_cast<double>(d.head_dim) *
                          static_cast<double>(seq_len) * static_cast<double>(batch);
  return elements * kv.bytes_per_param();
}

}  // namespace moecap

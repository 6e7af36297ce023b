#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "moecap/expert_set.hpp"
#include "moecap/model.hpp"

namespace moecap {

enum class Phase { prefill, decode };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

struct LayerActivation {
  std::uint32_t layer = 0;
  ExpertSet experts;  // routed experts only; shared experts are implied
};

struct ForwardPassRecord {
  std::uint64_t pass_id = 0;
  Phase phase = Phase::decode;
  std::uint64_t batch_size = 1;
  std::uint64_t tokens_processed = 1;
  double latency_s = 1.0;
  std::uint64_t kv_bytes_read = 0;  // 0 = unknown
  std::vector<LayerActivation> activated;  // ascending layer order

  const ExpertSet* layer(std::uint32_t index) const;
};

// Recorded routing outcome of a sequence of forward passes.
//
// Text format, one pass per line:
//
//   # model: <name>
//   pass_id,phase,batch_size,tokens_processed,latency_s,kv_bytes_read,layer:hex;layer:hex;...
//
// Comment lines before the first record are kept verbatim and written back;
// comments after that point are skipped. Every bitmap in a file has the same
// number of hex characters.
struct ActivationSheet {
  std::string model_name;
  std::vector<std::string> header_comments;  // without the model directive
  std::size_t expert_slots = 0;              // bitmap width in bits
  std::vector<ForwardPassRecord> passes;
};

// Syntactic parse; invariants that need the model are checked by validate().
ActivationSheet parse_activation_sheet(std::istream& in);
ActivationSheet parse_activation_sheet(std::string_view text);
// Parse and validate against `desc`.
ActivationSheet load_activation_sheet(std::istream& in, const ModelDescriptor& desc);
ActivationSheet load_activation_sheet_file(const std::filesystem::path& path, const ModelDescriptor& desc);

void write_activation_sheet(std::ostream& out, const ActivationSheet& sheet);
std::string serialize_activation_sheet(const ActivationSheet& sheet);

// Throws TraceError naming the pass on any violated invariant: unknown
// model, out-of-range layer/expert, missing MoE layer, bad counts.
void validate(const ActivationSheet& sheet, const ModelDescriptor& desc);

// Activated parameters of one pass (routed experts from the bitmaps, plus
// everything always read).
std::uint64_t activated_params(const ForwardPassRecord& pass, const ModelDescriptor& desc,
                               AccountingOptions opts = {});

struct ActivatedFraction {
  std::vector<double> per_pass;              // all parameters
  double mean = 0.0;
  std::vector<double> per_pass_expert_only;  // routed + shared expert params only
  double mean_expert_only = 0.0;
};

ActivatedFraction activated_fraction(const ActivationSheet& sheet, const ModelDescriptor& desc,
                                     AccountingOptions opts = {});

}  // namespace moecap

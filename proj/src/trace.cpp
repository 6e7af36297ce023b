#include "moecap/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "moecap/error.hpp"

namespace moecap {
namespace {

constexpr std::string_view kModelDirective = "# model:";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::uint64_t parse_count(std::string_view text, std::size_t line, long long pass_id, const char* what) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw TraceError(line, pass_id, std::string("malformed ") + what + " '" + std::string(text) + "'");
  return v;
}

double parse_real(std::string_view text, std::size_t line, long long pass_id, const char* what) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw TraceError(line, pass_id, std::string("malformed ") + what + " '" + std::string(text) + "'");
  return v;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void check_counts(const ForwardPassRecord& p, std::size_t line) {
  const auto id = static_cast<long long>(p.pass_id);
  if (!(p.latency_s > 0.0) || !std::isfinite(p.latency_s))
    throw TraceError(line, id, "latency_s must be positive and finite");
  if (p.batch_size < 1) throw TraceError(line, id, "batch_size must be >= 1");
  if (p.phase == Phase::decode && p.tokens_processed != p.batch_size)
    throw TraceError(line, id, "decode pass must process exactly batch_size tokens");
  if (p.phase == Phase::prefill && p.tokens_processed < p.batch_size)
    throw TraceError(line, id, "prefill pass must process at least batch_size tokens");
}

}  // namespace

std::string_view to_string(Phase phase) { return phase == Phase::prefill ? "prefill" : "decode"; }

Phase parse_phase(std::string_view text) {
  if (text == "prefill") return Phase::prefill;
  if (text == "decode") return Phase::decode;
  throw ValidationError("phase", "expected 'prefill' or 'decode', got '" + std::string(text) + "'");
}

const ExpertSet* ForwardPassRecord::layer(std::uint32_t index) const {
  auto it = std::lower_bound(activated.begin(), activated.end(), index,
                             [](const LayerActivation& a, std::uint32_t l) { return a.layer < l; });
  return (it != activated.end() && it->layer == index) ? &it->experts : nullptr;
}

ActivationSheet parse_activation_sheet(std::istream& in) {
  ActivationSheet sheet;
  bool have_model = false;
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    if (trim(line).front() == '#') {
      if (line.starts_with(kModelDirective)) {
        if (have_model) throw TraceError(line_no, -1, "duplicate model directive");
        sheet.model_name = std::string(trim(line.substr(kModelDirective.size())));
        if (sheet.model_name.empty()) throw TraceError(line_no, -1, "empty model name");
        have_model = true;
      } else if (sheet.passes.empty()) {
        sheet.header_comments.emplace_back(line);
      }
      continue;
    }

    const auto fields = split(line, ',');
    if (fields.size() != 7)
      throw TraceError(line_no, -1, "expected 7 comma-separated fields, got " + std::to_string(fields.size()));

    ForwardPassRecord p;
    p.pass_id = parse_count(fields[0], line_no, -1, "pass_id");
    const auto id = static_cast<long long>(p.pass_id);
    try {
      p.phase = parse_phase(trim(fields[1]));
    } catch (const ValidationError& e) {
      throw TraceError(line_no, id, e.what());
    }
    p.batch_size = parse_count(fields[2], line_no, id, "batch_size");
    p.tokens_processed = parse_count(fields[3], line_no, id, "tokens_processed");
    p.latency_s = parse_real(fields[4], line_no, id, "latency_s");
    p.kv_bytes_read = parse_count(fields[5], line_no, id, "kv_bytes_read");
    check_counts(p, line_no);

    const auto layers = trim(fields[6]);
    if (!layers.empty()) {
      for (auto entry : split(layers, ';')) {
        entry = trim(entry);
        const auto colon = entry.find(':');
        if (colon == std::string_view::npos) throw TraceError(line_no, id, "layer entry without ':'");
        LayerActivation la;
        la.layer = static_cast<std::uint32_t>(parse_count(entry.substr(0, colon), line_no, id, "layer index"));
        const auto hex = trim(entry.substr(colon + 1));
        try {
          la.experts = ExpertSet::from_hex(hex);
        } catch (const std::invalid_argument& e) {
          throw TraceError(line_no, id, e.what());
        }
        if (sheet.expert_slots == 0) {
          sheet.expert_slots = la.experts.capacity();
        } else if (la.experts.capacity() != sheet.expert_slots) {
          throw TraceError(line_no, id, "bitmap width differs from earlier records");
        }
        if (!p.activated.empty() && p.activated.back().layer >= la.layer)
          throw TraceError(line_no, id, "layer indices must be strictly ascending");
        p.activated.push_back(std::move(la));
      }
    }
    sheet.passes.push_back(std::move(p));
  }

  if (!have_model) throw TraceError(0, -1, "missing '# model: <name>' directive");
  if (sheet.passes.empty()) throw TraceError(0, -1, "trace contains no passes");
  return sheet;
}

ActivationSheet parse_activation_sheet(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_activation_sheet(in);
}

ActivationSheet load_activation_sheet(std::istream& in, const ModelDescriptor& desc) {
  auto sheet = parse_activation_sheet(in);
  validate(sheet, desc);
  return sheet;
}

ActivationSheet load_activation_sheet_file(const std::filesystem::path& path, const ModelDescriptor& desc) {
  std::ifstream in(path);
  if (!in) throw ValidationError("trace", "cannot open " + path.string());
  return load_activation_sheet(in, desc);
}

void write_activation_sheet(std::ostream& out, const ActivationSheet& sheet) {
  out << kModelDirective << ' ' << sheet.model_name << '\n';
  for (const auto& c : sheet.header_comments) out << c << '\n';
  for (const auto& p : sheet.passes) {
    out << p.pass_id << ',' << to_string(p.phase) << ',' << p.batch_size << ',' << p.tokens_processed << ','
        << format_real(p.latency_s) << ',' << p.kv_bytes_read << ',';
    for (std::size_t i = 0; i < p.activated.size(); ++i) {
      if (i) out << ';';
      ExpertSet padded(sheet.expert_slots);
      padded |= p.activated[i].experts;
      out << p.activated[i].layer << ':' << padded.to_hex();
    }
    out << '\n';
  }
}

std::string serialize_activation_sheet(const ActivationSheet& sheet) {
  std::ostringstream out;
  write_activation_sheet(out, sheet);
  return out.str();
}

void validate(const ActivationSheet& sheet, const ModelDescriptor& desc) {
  if (sheet.model_name != desc.name)
    throw TraceError(0, -1, "trace is for model '" + sheet.model_name + "' but descriptor is '" + desc.name + "'");
  if (sheet.passes.empty()) throw TraceError(0, -1, "trace contains no passes");

  const std::uint64_t lower = std::min<std::uint64_t>(desc.top_k, desc.n_expert);
  for (const auto& p : sheet.passes) {
    const auto id = static_cast<long long>(p.pass_id);
    check_counts(p, 0);
    for (const auto& la : p.activated) {
      if (la.layer >= desc.n_layer)
        throw TraceError(0, id, "layer " + std::to_string(la.layer) + " out of range for " +
                                    std::to_string(desc.n_layer) + " layers");
      if (!desc.is_moe_layer(la.layer))
        throw TraceError(0, id, "layer " + std::to_string(la.layer) + " is not an MoE layer");
      const auto top = la.experts.max_index();
      if (top >= static_cast<long long>(desc.n_expert))
        throw TraceError(0, id, "expert index " + std::to_string(top) + " out of range for " +
                                    std::to_string(desc.n_expert) + " experts");
    }
    const std::uint64_t upper = std::min<std::uint64_t>(desc.n_expert, p.tokens_processed * desc.top_k);
    for (std::uint32_t l = 0; l < desc.n_layer; ++l) {
      if (!desc.is_moe_layer(l)) continue;
      const ExpertSet* set = p.layer(l);
      if (set == nullptr) throw TraceError(0, id, "missing activation bitmap for MoE layer " + std::to_string(l));
      const auto n = set->count();
      if (n < lower)
        throw TraceError(0, id, "layer " + std::to_string(l) + " activates " + std::to_string(n) +
                                    " experts, fewer than top_k");
      if (n > upper)
        throw TraceError(0, id, "layer " + std::to_string(l) + " activates " + std::to_string(n) +
                                    " experts, more than tokens x top_k allows");
    }
  }
}

std::uint64_t activated_params(const ForwardPassRecord& pass, const ModelDescriptor& desc, AccountingOptions opts) {
  std::uint64_t routed = 0;
  for (const auto& la : pass.activated) routed += la.experts.count();
  return always_active_params(desc, opts) + routed * desc.params_expert;
}

ActivatedFraction activated_fraction(const ActivationSheet& sheet, const ModelDescriptor& desc,
                                     AccountingOptions opts) {
  if (sheet.model_name != desc.name)
    throw ValidationError("model", "trace is for '" + sheet.model_name + "', descriptor is '" + desc.name + "'");

  const double total = static_cast<double>(total_params(desc, opts));
  const std::uint64_t moe_layers = desc.moe_layer_count();
  const std::uint64_t shared = moe_layers * desc.n_shared * desc.params_shared_expert;
  const double expert_total = static_cast<double>(moe_layers * desc.n_expert * desc.params_expert + shared);

  ActivatedFraction out;
  for (const auto& p : sheet.passes) {
    out.per_pass.push_back(total > 0 ? static_cast<double>(activated_params(p, desc, opts)) / total : 0.0);
    std::uint64_t routed = 0;
    for (const auto& la : p.activated) routed += la.experts.count();
    const double touched = static_cast<double>(routed * desc.params_expert + shared);
    out.per_pass_expert_only.push_back(expert_total > 0 ? touched / expert_total : 0.0);
  }
  const double n = static_cast<double>(sheet.passes.size());
  for (double f : out.per_pass) out.mean += f;
  for (double f : out.per_pass_expert_only) out.mean_expert_only += f;
  if (n > 0) {
    out.mean /= n;
    out.mean_expert_only /= n;
  }
  return out;
}

}  // namespace moecap

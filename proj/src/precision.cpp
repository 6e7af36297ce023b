#include "moecap/precision.hpp"

#include "moecap/error.hpp"

namespace moecap {

Precision Precision::from_bits(int bits) {
  if (bits != 4 && bits != 8 && bits != 16 && bits != 32)
    throw ValidationError("precision", "bits per parameter must be 4, 8, 16 or 32, got " + std::to_string(bits));
  return Precision(bits);
}

Precision Precision::parse(std::string_view text) {
  if (text == "0.5" || text == "int4" || text == "fp4") return Precision(4);
  if (text == "1" || text == "int8" || text == "fp8") return Precision(8);
  if (text == "2" || text == "fp16" || text == "bf16") return Precision(16);
  if (text == "4" || text == "fp32") return Precision(32);
  throw ValidationError("precision", "unknown precision '" + std::string(text) +
                                         "' (expected bytes 0.5/1/2/4 or int4/int8/fp8/fp16/bf16/fp32)");
}

std::string Precision::name() const {
  switch (bits_) {
    case 4: return "int4";
    case 8: return "int8";
    case 16: return "fp16";
    default: return "fp32";
  }
}

}  // namespace moecap

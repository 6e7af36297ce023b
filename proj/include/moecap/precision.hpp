#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace moecap {

// Storage width of one parameter. Only 4/8/16/32-bit widths exist.
class Precision {
 public:
  static Precision from_bits(int bits);
  // Accepts byte counts ("0.5", "1", "2", "4") and names ("int4", "int8",
  // "fp8", "fp16", "bf16", "fp32").
  static Precision parse(std::string_view text);

  static Precision int4() { return Precision(4); }
  static Precision int8() { return Precision(8); }
  static Precision fp16() { return Precision(16); }
  static Precision fp32() { return Precision(32); }

  int bits() const noexcept { return bits_; }
  double bytes_per_param() const noexcept { return bits_ / 8.0; }
  double bytes(std::uint64_t params) const noexcept { return static_cast<double>(params) * bytes_per_param(); }
  std::string name() const;

  friend bool operator==(Precision, Precision) = default;

 private:
  explicit Precision(int bits) : bits_(bits) {}
  int bits_;
};

}  // namespace moecap

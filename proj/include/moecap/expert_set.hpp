#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moecap {

// Fixed-capacity bitmap of expert indices. Hex form: expert 0 is the
// least-significant bit of the last hex character.
class ExpertSet {
 public:
  ExpertSet() = default;
  explicit ExpertSet(std::size_t capacity);

  // Capacity is 4 x text.size(). Throws std::invalid_argument on non-hex input.
  static ExpertSet from_hex(std::string_view text);
  // Exactly capacity / 4 characters (capacity rounded up to a nibble).
  std::string to_hex() const;

  std::size_t capacity() const noexcept { return capacity_; }
  void set(std::size_t index);
  bool test(std::size_t index) const;
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  // Highest set index, or -1 when empty.
  long long max_index() const;

  ExpertSet& operator|=(const ExpertSet& other);
  bool is_subset_of(const ExpertSet& other) const;
  friend bool operator==(const ExpertSet& a, const ExpertSet& b);

 private:
  std::size_t capacity_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace moecap

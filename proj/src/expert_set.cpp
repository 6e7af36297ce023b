#include "moecap/expert_set.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace moecap {
namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

ExpertSet::ExpertSet(std::size_t capacity) : capacity_(capacity), words_((capacity + 63) / 64, 0) {}

ExpertSet ExpertSet::from_hex(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty expert bitmap");
  ExpertSet s(text.size() * 4);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int v = hex_value(text[text.size() - 1 - i]);
    if (v < 0) throw std::invalid_argument("non-hex character in expert bitmap '" + std::string(text) + "'");
    for (int b = 0; b < 4; ++b) {
      if (v & (1 << b)) s.set(i * 4 + b);
    }
  }
  return s;
}

std::string ExpertSet::to_hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  const std::size_t nibbles = std::max<std::size_t>(1, (capacity_ + 3) / 4);
  std::string out(nibbles, '0');
  for (std::size_t i = 0; i < nibbles; ++i) {
    int v = 0;
    for (int b = 0; b < 4; ++b) {
      const std::size_t idx = i * 4 + b;
      if (idx < capacity_ && test(idx)) v |= 1 << b;
    }
    out[nibbles - 1 - i] = digits[v];
  }
  return out;
}

void ExpertSet::set(std::size_t index) {
  if (index >= capacity_) throw std::out_of_range("expert index " + std::to_string(index) + " beyond bitmap capacity");
  words_[index / 64] |= std::uint64_t{1} << (index % 64);
}

bool ExpertSet::test(std::size_t index) const {
  if (index >= capacity_) return false;
  return (words_[index / 64] >> (index % 64)) & 1u;
}

std::size_t ExpertSet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

long long ExpertSet::max_index() const {
  for (std::size_t w = words_.size(); w-- > 0;) {
    if (words_[w] != 0) return static_cast<long long>(w * 64 + 63 - std::countl_zero(words_[w]));
  }
  return -1;
}

ExpertSet& ExpertSet::operator|=(const ExpertSet& other) {
  if (other.capacity_ > capacity_) {
    capacity_ = other.capacity_;
    words_.resize(other.words_.size(), 0);
  }
  for (std::size_t i = 0; i < other.words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

bool ExpertSet::is_subset_of(const ExpertSet& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::uint64_t theirs = i < other.words_.size() ? other.words_[i] : 0;
    if (words_[i] & ~theirs) return false;
  }
  return true;
}

bool operator==(const ExpertSet& a, const ExpertSet& b) {
  const std::size_t n = std::max(a.words_.size(), b.words_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t x = i < a.words_.size() ? a.words_[i] : 0;
    const std::uint64_t y = i < b.words_.size() ? b.words_[i] : 0;
    if (x != y) return false;
  }
  return true;
}

}  // namespace moecap

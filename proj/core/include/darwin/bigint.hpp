#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace darwin {

// Unsigned arbitrary-precision integer, just big enough for search-space
// cardinalities (products of per-gene cardinalities easily overflow 64 bits).
// Limbs are base 1e9 so printing is a straight decimal join.
class BigUint {
 public:
  BigUint() : BigUint(0) {}

  explicit BigUint(std::uint64_t v) {
    do {
      limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
      v /= kBase;
    } while (v != 0);
  }

  void mul(std::uint32_t factor) {
    std::uint64_t carry = 0;
    for (auto& limb : limbs_) {
      std::uint64_t cur = static_cast<std::uint64_t>(limb) * factor + carry;
      limb = static_cast<std::uint32_t>(cur % kBase);
      carry = cur / kBase;
    }
    while (carry != 0) {
      limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
      carry /= kBase;
    }
  }

  std::string to_string() const {
    std::string out = std::to_string(limbs_.back());
    char buf[16];
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
      std::snprintf(buf, sizeof buf, "%09u", *it);
      out += buf;
    }
    return out;
  }

  bool operator==(const BigUint& other) const { return limbs_ == other.limbs_; }
  bool operator==(std::uint64_t v) const { return *this == BigUint(v); }

 private:
  static constexpr std::uint64_t kBase = 1000000000;
  std::vector<std::uint32_t> limbs_;  // little-endian
};

}  // namespace darwin

#pragma once

// Counter-based random streams: every draw is a pure function of
// (seed, purpose tag, stream index, draw index), so results do not depend on
// the order in which parallel work is scheduled.

#include <cstdint>
#include <string_view>

namespace gevrey {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn purpose tags into stream keys.
constexpr std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view tag, std::uint64_t index)
      : key_(splitmix64(splitmix64(seed ^ tag_hash(tag)) ^ splitmix64(index + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t at(std::uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }
  std::uint64_t next() { return at(counter_++); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gevrey

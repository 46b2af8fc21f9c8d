#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "gcrl/errors.hpp"

namespace gcrl {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t mix_key(std::uint64_t h, std::uint64_t key) {
  return splitmix64(h ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

// A seeded random stream. Independent streams are derived from a master seed
// and a list of integer keys, so any (seed, problem, step, index) tuple maps to
// the same draws regardless of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  template <typename... Keys>
  static RngStream derive(std::uint64_t seed, Keys... keys) {
    std::uint64_t h = splitmix64(seed);
    ((h = mix_key(h, static_cast<std::uint64_t>(keys))), ...);
    return RngStream(h);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("RngStream::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  static RngStream deserialize(const std::string& state) {
    RngStream r;
    std::istringstream is(state);
    is >> r.engine_;
    if (is.fail()) throw IoError("corrupt rng state");
    return r;
  }

  friend bool operator==(const RngStream& a, const RngStream& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stable hash of a problem id for stream keys.
inline std::uint64_t stream_key(std::string_view id) { return fnv1a64(id); }

}  // namespace gcrl

#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ov3d {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a, stable across platforms (unlike std::hash).
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) {
    bytes(s.data(), s.size());
    return u64(s.size());
  }
  Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return u64(bits);
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Independent stream derived from a master seed and a path of stream ids,
/// so per-scene work does not depend on processing order.
inline Rng split_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  Fnv1a h;
  h.u64(seed);
  for (auto s : stream) h.u64(s);
  const std::uint64_t d = h.digest();
  std::seed_seq seq{static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
  if (sigma == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

}  // namespace ov3d

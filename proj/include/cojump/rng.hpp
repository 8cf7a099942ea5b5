#pragma once

// Random streams used throughout the simulator and the bootstrap.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard
// (the 10000th draw of a default-constructed engine is 9981545732273789042).
// Uniforms take the top 53 bits of one draw. Normals use the Marsaglia polar
// method on those uniforms, so the stream does not depend on the standard
// library's distribution implementations. Child streams are keyed by
// SplitMix64(master ^ SplitMix64(stream_id)), which makes per-replication and
// per-day streams independent of evaluation order.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cojump {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of child stream `stream_id` under `master`.
constexpr std::uint64_t child_seed(std::uint64_t master, std::uint64_t stream_id) noexcept {
  return splitmix64(master ^ splitmix64(stream_id + 0x632BE59BD9B4E019ull));
}

/// FNV-1a over a string; used to key streams by names (dates, pairs).
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t next_u64() noexcept { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cojump

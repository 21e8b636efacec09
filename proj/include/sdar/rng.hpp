#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sdar {

// All randomness in a run flows from a single root seed. Substreams are
// derived as substream(root, node, purpose) so the two engines see the same
// per-node arrival processes for a given seed, and runs are reproducible
// bit-for-bit. The engine is std::mt19937_64 (output sequence fixed by the
// standard); the variate transforms are inlined here because the std::*
// distribution algorithms are implementation-defined.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng substream(std::uint64_t root, std::uint32_t node, std::uint32_t purpose) {
    std::uint64_t key = splitmix64(root);
    key = splitmix64(key ^ (0x9e3779b9ULL + node));
    key = splitmix64(key ^ (0xdeadbeefULL + purpose));
    return Rng(key);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0,1); never returns 0 so log() is safe.
  double next_unit() {
    const double u = (next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(next_unit()) / rate; }

  // Geometric on {1,2,...} with success probability p (mean 1/p).
  long geometric_from_one(double p) {
    if (p >= 1.0) return 1;
    const double g = std::floor(std::log(next_unit()) / std::log1p(-p));
    return 1 + static_cast<long>(g);
  }

  // Uniform integer in [lo, hi] inclusive, by rejection.
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int>(v % range);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sdar

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace glam {

/// Seeded generator with named sub-streams.
///
/// All randomness in a run flows from one seed; components ask for
/// `stream("dropout")`, `stream("gumbel")` and so on, so adding draws to one
/// component never perturbs another. Floating-point draws are built from raw
/// engine bits rather than std distributions, whose output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent generator derived from this one's seed and `name`.
  Rng stream(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return Rng(mix(seed_ ^ mix(h)));
  }

  /// Independent generator derived from this one's seed and an integer tag.
  Rng stream(std::uint64_t tag) const { return Rng(mix(seed_ + 0x9E3779B97F4A7C15ULL * (tag + 1))); }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard Gumbel draw, -ln(-ln u).
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// xoshiro256+ for bulk draws where mt19937_64 is too slow. Only the upper
/// bits are used.
class BulkBits {
 public:
  explicit BulkBits(Rng& rng) {
    for (auto& w : s_) {
      w = rng.next();
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next() {
    const std::uint64_t result = s_[0] + s_[3];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = (s_[3] << 45) | (s_[3] >> 19);
    return result;
  }

 private:
  std::uint64_t s_[4];
};

/// Inverted-dropout multipliers: out[k] is 0 with probability `rate`
/// (rounded down to a multiple of 2^-24), otherwise `keep`. Consumes four
/// draws of `rng` per call regardless of `count`.
template <typename Scalar>
void fill_dropout_scales(Rng& rng, double rate, double keep, Scalar* out, std::ptrdiff_t count) {
  BulkBits bits(rng);
  const auto threshold = static_cast<std::uint64_t>(rate * 16777216.0);
  const Scalar value[2] = {Scalar(0), static_cast<Scalar>(keep)};
  std::ptrdiff_t k = 0;
  for (; k + 1 < count; k += 2) {
    const std::uint64_t w = bits.next();
    out[k] = value[((w >> 40) & 0xFFFFFF) >= threshold];
    out[k + 1] = value[((w >> 16) & 0xFFFFFF) >= threshold];
  }
  if (k < count) out[k] = value[(bits.next() >> 40) >= threshold];
}

}  // namespace glam

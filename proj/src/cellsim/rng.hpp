/**
 * cellsim
 *
 * Seeded random helper. std::mt19937_64 has a standard-mandated output
 * sequence, but the standard distributions do not, so the uniform draws
 * are derived here from raw engine words. Identical seeds therefore give
 * identical worlds on every platform.
 */

#ifndef CELLSIM_RNG_HPP_
#define CELLSIM_RNG_HPP_

#include <cstdint>
#include <random>

namespace cellsim {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /** Uniform integer in [0, n), rejection-sampled to avoid modulo bias. */
  std::uint64_t uniform_u64(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(
                    uniform_u64(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /** Uniform double in [0, 1) with 53 random bits. */
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool chance(double p) { return uniform() < p; }

private:
  std::mt19937_64 engine_;
};

}  // namespace cellsim

#endif  // CELLSIM_RNG_HPP_

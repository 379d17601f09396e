#pragma once

#include <cstdint>
#include <random>

namespace fedorl {

/// splitmix64 finalizer; derives independent seed streams (one per agent,
/// per sweep point, ...) from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/** Deterministic uniform generator.
 *
 * All draws are derived from the raw mt19937_64 word stream with explicit
 * bit arithmetic, never through std distribution objects, so sequences are
 * reproducible across standard libraries.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Index drawn by inverse CDF; weights must be nonnegative, not all zero.
    template <typename Vec>
    int categorical(const Vec& weights) {
        const int n = static_cast<int>(weights.size());
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights[i];
        const double u = uniform() * total;
        double acc = 0.0;
        int last = 0;
        for (int i = 0; i < n; ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last = i;
            if (u < acc) return i;
        }
        return last;  // rounding at the top of the CDF lands on the last positive entry
    }

    /// Uniform index in [0, n). Modulo bias is ~n/2^64, irrelevant here.
    int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace fedorl

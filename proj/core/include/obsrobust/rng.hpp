#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace obsrobust {

/// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
/// needed so that results are reproducible across platforms and standard
/// library implementations; std::*_distribution is not portable bit-for-bit.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// Sample an index from an (unnormalized is fine) nonnegative weight vector.
    std::size_t next_categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    /// Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> next_permutation_of(std::size_t n) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(perm[i - 1], perm[j]);
        }
        return perm;
    }

    /// Derive an independent stream, e.g. one per rollout or per sample, so
    /// that parallel work is reproducible regardless of scheduling.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (0xa0761d6478bd642full * (index + 1)));
        mix.next_u64();
        return mix;
    }

  private:
    std::uint64_t state_;
};

}  // namespace obsrobust

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace promptcache {

/// Seeded generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The standard distributions are implementation-defined, so the draws below
/// are derived from raw engine output directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal draw (Box-Muller, one value per call).
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a tag (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace promptcache

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace qks {

/// Deterministic PRNG: std::mt19937_64 raw stream with hand-rolled value
/// transforms, so the full stream is bit-identical on every platform
/// (the standard pins the engine but not the library distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller with a cached spare.
    double normal();

    /// Uniform integer in [0, n), unbiased via masked rejection.
    std::uint64_t below(std::uint64_t n);

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from a base seed and a tag
/// (splitmix64 finalizer). Used for per-epoch shuffles, per-grid-point
/// sweep seeds, and the init/training stream split.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

} // namespace qks

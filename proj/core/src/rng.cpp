#include "qks/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "qks/errors.hpp"

namespace qks {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw DataError("Rng::below(0)");
    if (n == 1) return 0;
    const std::uint64_t mask = ~std::uint64_t(0) >> std::countl_zero(n - 1);
    for (;;) {
        const std::uint64_t v = next_u64() & mask;
        if (v < n) return v;
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace qks

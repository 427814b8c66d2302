#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mfagl {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Seeded random source with platform-stable draws. The engine is
/// std::mt19937_64 (whose output sequence the standard pins down); the
/// distributions are implemented here because the standard library's are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in {0, ..., n-1}. Modulo bias is below 2^-53 for any n
    /// this library draws.
    std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double normal() {
        double u1 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

    /// Independent generator for a named substream (per-tree seeds etc.).
    Rng derive(std::uint64_t stream) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream + 1)));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace mfagl

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace emoeval {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

// Seed for one named scope (an environment id, a stage name, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view scope) noexcept {
    return mix64(master ^ fnv1a64(scope));
}

// Seed for an indexed sub-scope, e.g. one turn of one environment.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view scope,
                                 std::uint64_t index) noexcept {
    return mix64(derive_seed(master, scope) ^ mix64(index + 1));
}

/// Deterministic random source. std::mt19937_64 output is pinned by the
/// standard; the uniform and normal transforms are written out here because
/// the std distributions are implementation-defined and would not reproduce
/// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1), 53-bit resolution
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Box-Muller; the second variate of each pair is cached.
    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return mean + stddev * radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace emoeval

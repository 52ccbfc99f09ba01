#pragma once

#include <cmath>
#include <cstdint>

namespace mpqp {

/**
 * SplitMix64 generator. Small, fast, and splittable: `split(k)` derives an
 * independent stream from the current state and a stream id without
 * advancing the parent, so per-region or per-hour sampling stays
 * reproducible regardless of iteration order.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        return mix(z);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given rate (mean 1/rate), by inversion.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    Rng split(std::uint64_t stream) const { return Rng(mix(state_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace mpqp

#pragma once

#include <cstdint>
#include <random>

namespace spmvlab {

/// Deterministic random source used by all generators.
///
/// The raw engine is std::mt19937_64, whose output sequence is pinned by the
/// C++ standard. Conversions to doubles and bounded integers are done here
/// by hand because the std::*_distribution classes are allowed to differ
/// between standard library implementations; with these conversions a seed
/// produces the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, bound). Lemire's multiply-and-reject method; unbiased.
    std::uint64_t next_below(std::uint64_t bound) {
        unsigned __int128 product =
            static_cast<unsigned __int128>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(product);
        if (low < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (low < threshold) {
                product = static_cast<unsigned __int128>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(product);
            }
        }
        return static_cast<std::uint64_t>(product >> 64);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace spmvlab

#pragma once

#include <cstdint>
#include <random>

namespace imdpbound {

/// SplitMix64 finalizer; used only to derive independent per-run seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Portable seeded generator: std::mt19937_64 (its output sequence is fixed by the
/// standard) with an explicit 53-bit conversion to [0, 1) instead of
/// std::uniform_real_distribution, whose algorithm is implementation-defined.
///
/// Stream splitting: run r of a Monte-Carlo batch with master seed S uses
/// mt19937_64(splitmix64(S ^ splitmix64(r))).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng for_run(std::uint64_t master_seed, std::uint64_t run_index) {
        return Rng(splitmix64(master_seed ^ splitmix64(run_index)));
    }

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n) by rejection, n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace imdpbound

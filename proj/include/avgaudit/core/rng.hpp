#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace avgaudit {

// ---------------------------------------------------------------------------
// Rng: portable pseudo-random stream.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard library distributions are NOT portable, so every
// derived quantity (uniform reals, bounded integers, normals, shuffles) is
// computed here from raw 64-bit draws:
//   uniform()     = (next_u64() >> 11) * 2^-53
//   uniform_int() = rejection sampling on the top bits
//   normal()      = Box-Muller, one value per call (no cached pair)
//   shuffle()     = Fisher-Yates from the back
//
// Sub-streams are derived from (seed, purpose tag, index) via FNV-1a and
// SplitMix64, so results never depend on the order in which parallel work
// is scheduled.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    std::uint64_t uniform_int(std::uint64_t n);  // [0, n), n > 0
    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    // k distinct indices from [0, n), in draw order. Requires k <= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    // Independent stream for a named purpose; does not advance this stream.
    Rng derive(std::string_view tag, std::uint64_t index = 0) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept;

} // namespace avgaudit

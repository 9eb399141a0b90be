#pragma once

#include <cstdint>
#include <vector>

namespace dbcd {

// Deterministic splitmix64 stream with Marsaglia-polar normals. The integer
// stream is pure 64-bit arithmetic, so equal seeds give equal streams on any
// platform. Pinned: splitmix64 (Steele et al. increment 0x9E3779B97F4A7C15).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased integer in [0, n), n > 0.
    std::uint64_t next_below(std::uint64_t n);

    // Standard normal.
    double normal();

    // Fisher-Yates over indices 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    // Independent child stream; mixing the tag keeps siblings decorrelated.
    SeededRng fork(std::uint64_t tag) const;

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Order-sensitive mixer for deriving per-(round, device, ...) seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0x6a09e667f3bcc909ULL,
                       std::uint64_t c = 0xbb67ae8584caa73bULL);

} // namespace dbcd

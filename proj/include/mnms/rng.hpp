#pragma once

#include <cstdint>

namespace mnms {

// Counter-based pseudo-random primitives. Everything downstream
// (row contents, placements, match planting) is a pure function of
// (seed, counter), so rows are generatable independently and runs are
// reproducible bit for bit.

// SplitMix64 finalizer. Full avalanche, bijective on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stateless stream: value for (seed, stream, counter).
constexpr std::uint64_t counter_rng(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t counter) {
    return mix64(mix64(seed ^ mix64(stream)) ^ counter);
}

// Seeded pseudo-random permutation of [0, n). Four-round Feistel network
// over the smallest even-bit power-of-two domain covering n, with
// cycle-walking to stay inside [0, n). O(1) expected per element; no
// state proportional to n is ever stored.
class SeededPermutation {
  public:
    SeededPermutation(std::uint64_t n, std::uint64_t seed)
        : n_(n), seed_(seed), half_bits_(1) {
        while ((std::uint64_t{1} << (2 * half_bits_)) < n_ && half_bits_ < 32)
            ++half_bits_;
        mask_ = (std::uint64_t{1} << half_bits_) - 1;
    }

    std::uint64_t size() const { return n_; }

    // Image of x under the permutation; requires x < n.
    std::uint64_t operator()(std::uint64_t x) const {
        if (n_ <= 1) return x;
        std::uint64_t y = encrypt(x);
        while (y >= n_) y = encrypt(y);  // cycle-walk back into the domain
        return y;
    }

  private:
    std::uint64_t encrypt(std::uint64_t x) const {
        std::uint64_t left = x >> half_bits_;
        std::uint64_t right = x & mask_;
        for (unsigned round = 0; round < 4; ++round) {
            std::uint64_t f = mix64(seed_ ^ (right + (std::uint64_t{round} << 56))) & mask_;
            std::uint64_t next = left ^ f;
            left = right;
            right = next;
        }
        return (left << half_bits_) | right;
    }

    std::uint64_t n_;
    std::uint64_t seed_;
    unsigned half_bits_;
    std::uint64_t mask_;
};

}  // namespace mnms

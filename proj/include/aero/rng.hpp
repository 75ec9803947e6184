#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace aero {

/// splitmix64 step; used for seed derivation only, never as the main stream.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a base seed with a list of context words (epoch, batch, design hash, ...)
/// into an independent stream seed. The mapping is fixed for all time: cached
/// artifacts and checkpoints depend on it.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = base ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t w : words) {
        s ^= w;
        out ^= splitmix64(s);
    }
    return out;
}

/// Hash of a string id, for deriving per-design RNG streams.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// PCG32 (XSH-RR variant). Small, fast, and bit-stable across platforms,
/// which plain std:: distributions are not. One (seed, stream) pair gives one
/// reproducible sequence; helpers below document the exact draw order.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0U;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in [0, 1) with full 53-bit mantissa; consumes two u32 draws.
    double next_double() {
        std::uint32_t a = next_u32();
        std::uint32_t b = next_u32();
        return ((static_cast<std::uint64_t>(a >> 5) << 27) | (b >> 6)) * (1.0 / 9007199254740992.0);
    }

    /// Unbiased integer in [0, n) by rejection; consumes a variable number of u32 draws.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        std::uint64_t threshold = (~std::uint64_t(0) - n + 1) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// In-place Fisher-Yates shuffle driven by a Pcg32 stream.
template <typename T>
void seeded_shuffle(std::vector<T>& v, Pcg32& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace aero

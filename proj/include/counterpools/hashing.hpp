#pragma once

#include <cstdint>

namespace counterpools {

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr uint64_t mix64(uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr uint64_t seeded_hash(uint64_t key, uint64_t seed) noexcept {
    return mix64(key ^ mix64(seed + 0x9e3779b97f4a7c15ULL));
}

}  // namespace counterpools

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace neatboost {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hierarchical seed derivation: a child seed is a pure function of the
/// parent seed, a stage name, and a list of indices. Stages seeded this way
/// can be reproduced independently of each other.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view stage,
                                    std::initializer_list<std::uint64_t> indices = {}) {
    // FNV-1a over the stage name
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stage) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = mix64(parent ^ mix64(h));
    for (std::uint64_t i : indices) s = mix64(s ^ mix64(i + 0x632be59bd9b4e019ULL));
    return s;
}

}  // namespace neatboost

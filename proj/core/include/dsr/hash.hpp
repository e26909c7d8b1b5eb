#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dsr {

/// 64-bit FNV-1a. Stable across platforms and runs; used for content ids,
/// cache keys and deterministic seeding. Not cryptographic.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Lower-case fixed-width hex rendering of a 64-bit value.
std::string hex64(std::uint64_t v);

/// 32-hex-character content id derived from two independently seeded
/// FNV-1a passes over the same bytes. Parts are joined with an
/// unambiguous separator before hashing.
std::string content_id(std::initializer_list<std::string_view> parts);

} // namespace dsr

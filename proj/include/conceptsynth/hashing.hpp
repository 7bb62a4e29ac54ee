#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace csynth {

// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

// Short content address: prefix + first `hex_chars` of the SHA-256.
std::string content_id(std::string_view prefix, std::string_view payload, std::size_t hex_chars = 16);

// First 8 bytes of SHA-256 as an integer. Used for deterministic mock decisions.
std::uint64_t stable_hash64(std::string_view data);

// Maps a stable hash to [0, 1).
double unit_interval(std::uint64_t h);

}  // namespace csynth

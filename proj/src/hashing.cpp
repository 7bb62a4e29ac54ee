#include "conceptsynth/hashing.hpp"

#include <openssl/sha.h>

#include <array>

namespace csynth {
namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> digest(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), out.data());
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const auto d = digest(data);
  std::string out;
  out.reserve(d.size() * 2);
  for (unsigned char b : d) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

std::string content_id(std::string_view prefix, std::string_view payload, std::size_t hex_chars) {
  return std::string(prefix) + sha256_hex(payload).substr(0, hex_chars);
}

std::uint64_t stable_hash64(std::string_view data) {
  const auto d = digest(data);
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) {
    h = (h << 8) | d[static_cast<std::size_t>(i)];
  }
  return h;
}

double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace csynth

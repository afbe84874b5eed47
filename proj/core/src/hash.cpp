#include "mfm/hash.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "mfm/error.hpp"
#include "mfm/rng.hpp"

namespace mfm {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ull;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t state = 0xcbf29ce484222325ull;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto n = static_cast<std::size_t>(in.gcount());
    state = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(buf.data()), n), state);
  }
  return hex64(state);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
  return splitmix64(splitmix64(base ^ fnv1a64(label)) + index);
}

}  // namespace mfm

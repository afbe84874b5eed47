#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace mfm {

// 64-bit FNV-1a. Stable across platforms; used for token seeding and artifact hashes.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view text);

std::string hex64(std::uint64_t value);

/// Hex digest of a file's bytes; throws IoError if unreadable.
std::string hash_file(const std::filesystem::path& path);

}  // namespace mfm

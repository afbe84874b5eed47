#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mfm::cli {

/// Resolves the effective seed: explicit flag, then MFM_SEED, then 0.
struct SeedChoice {
  std::uint64_t value = 0;
  std::string source;  // "flag", "env" or "default"
};
SeedChoice resolve_seed(std::optional<std::uint64_t> flag);

/// One JSON record per command run: argv, flags, seed, input hashes, timestamps and
/// output artifacts with their hashes.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void seed(const SeedChoice& seed);
  void flag(const std::string& name, nlohmann::json value);
  void input(const std::string& role, const std::filesystem::path& path);
  void artifact(const std::filesystem::path& path);
  void extra(const std::string& key, nlohmann::json value);

  /// Stamps the end time and writes the manifest; returns its path.
  std::filesystem::path write(const std::filesystem::path& path);

  const nlohmann::json& data() const { return doc_; }

 private:
  nlohmann::json doc_;
};

std::string utc_timestamp(std::chrono::system_clock::time_point when);

}  // namespace mfm::cli

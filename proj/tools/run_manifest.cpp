#include "run_manifest.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "mfm/error.hpp"
#include "mfm/hash.hpp"

namespace mfm::cli {

SeedChoice resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return {*flag, "flag"};
  if (const char* env = std::getenv("MFM_SEED"); env && *env) {
    const std::string text(env);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw ValidationError("MFM_SEED must be an unsigned integer, got '" + text + "'");
    }
    return {v, "env"};
  }
  return {0, "default"};
}

std::string utc_timestamp(std::chrono::system_clock::time_point when) {
  const std::time_t t = std::chrono::system_clock::to_time_t(when);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv) {
  doc_["command"] = std::move(command);
  doc_["argv"] = std::move(argv);
  doc_["flags"] = nlohmann::json::object();
  doc_["inputs"] = nlohmann::json::array();
  doc_["artifacts"] = nlohmann::json::array();
  doc_["started_at"] = utc_timestamp(std::chrono::system_clock::now());
}

void RunManifest::seed(const SeedChoice& seed) {
  doc_["seed"] = seed.value;
  doc_["seed_source"] = seed.source;
}

void RunManifest::flag(const std::string& name, nlohmann::json value) { doc_["flags"][name] = std::move(value); }

void RunManifest::input(const std::string& role, const std::filesystem::path& path) {
  doc_["inputs"].push_back({{"role", role}, {"path", path.string()}, {"hash", hash_file(path)}});
}

void RunManifest::artifact(const std::filesystem::path& path) {
  doc_["artifacts"].push_back({{"path", path.string()}, {"hash", hash_file(path)}});
}

void RunManifest::extra(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

std::filesystem::path RunManifest::write(const std::filesystem::path& path) {
  doc_["finished_at"] = utc_timestamp(std::chrono::system_clock::now());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << doc_.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
  return path;
}

}  // namespace mfm::cli

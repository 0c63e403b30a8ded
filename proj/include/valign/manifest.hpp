#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace valign {

inline constexpr const char* kToolVersion = "0.1.0";

struct StageRecord {
  std::string status;                // complete | failed | invalid
  std::vector<std::string> outputs;  // relative to the run directory
  std::uint64_t seed = 0;
  std::string detail;
};

struct RunManifest {
  std::string run_id;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::map<std::string, StageRecord> stages;

  static std::filesystem::path path_in(const std::filesystem::path& run_dir);
  /// Missing file yields an empty manifest. Stages whose outputs are gone
  /// are downgraded to "invalid".
  static RunManifest load(const std::filesystem::path& run_dir);
  void save(const std::filesystem::path& run_dir) const;

  bool complete(const std::string& stage) const;
};

std::string config_hash(const std::string& config_text, std::uint64_t seed);

}  // namespace valign

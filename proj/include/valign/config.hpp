#pragma once

// Audit configuration: a TOML-style file with top-level keys, [tables]
// and [[model]] entries. Relative paths resolve against the file's
// directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "valign/design.hpp"
#include "valign/elicit.hpp"
#include "valign/simulator.hpp"

namespace valign {

/// Parses the supported TOML subset into a JSON tree. Throws ParseError.
nlohmann::json parse_toml_subset(const std::string& text, const std::string& source = "<config>");

struct SimulatorSettings {
  std::string latent = "local";  // "local", "random", or a population label
  std::string target;            // population label blended in with bias_blend
  double bias_blend = 0.0;
  double noise_sd = 0.0;
  double null_rate = 0.0;
  RespondentSampling sampling = RespondentSampling::bernoulli;
};

struct ModelConfig {
  std::string id;
  std::string family;
  std::string backend = "simulator";  // simulator | openai
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string api_key_env;
  SimulatorSettings simulator;
};

struct JudgeConfig {
  std::string kind = "rule";  // rule | remote
  std::string model_id;
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string api_key_env;
};

struct AuditConfig {
  std::string text;  // raw file contents, hashed into the manifest
  std::filesystem::path source_dir;

  std::vector<std::string> languages;
  std::filesystem::path questions;
  std::filesystem::path survey;
  std::filesystem::path templates;
  std::filesystem::path capability;
  std::optional<std::filesystem::path> gold;
  LocalCountryMap local_countries;

  std::size_t prompts_per_condition = 300;
  std::size_t variants_per_topic = 0;  // 0: ceil(prompts_per_condition / topics)
  std::size_t repeats = 3;
  std::size_t n_respondents = 10;
  std::uint64_t seed = 0;
  std::string rq1_level = "language";
  std::string aggregation = "mean";  // mean | generation
  std::size_t baseline_replicates = 100;
  std::size_t resample_pairs = 100;
  std::size_t resample_sample_size = 0;
  bool standardize = false;
  bool robust_se = false;

  RunConfig elicit;
  JudgeConfig judge;
  std::vector<ModelConfig> models;

  const ModelConfig* find_model(const std::string& id) const;
  /// Checks referenced files exist, enumerations are known, and credentials
  /// for live backends are present in the environment.
  void validate() const;
};

AuditConfig parse_config(const std::string& text, const std::filesystem::path& source_dir);
AuditConfig load_config(const std::filesystem::path& path);

}  // namespace valign

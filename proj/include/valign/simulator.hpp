#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "valign/backend.hpp"
#include "valign/ground_truth.hpp"

namespace valign {

enum class RespondentSampling {
  bernoulli,  // each respondent independently pro with the blended probability
  expected,   // exactly round(p * n) pro respondents
};

struct SimulatorConfig {
  VpsVector latent_vps;
  VpsVector target_vps;  // only consulted when bias_blend > 0
  double bias_blend = 0.0;
  double noise_sd = 0.0;
  std::size_t n_respondents = 10;
  double null_rate = 0.0;  // share of respondents giving a no-opinion answer
  std::string output_language = "en";
  RespondentSampling sampling = RespondentSampling::bernoulli;

  void validate() const;
};

/// Probability that a simulated respondent is pro before noise.
double blended_probability(const SimulatorConfig& config, const std::string& question_id);

/// An enumerated list of n_respondents stance statements in the configured
/// language, deterministic in (config, question_id, seed).
std::string simulate_generation(const SimulatorConfig& config, const std::string& question_id,
                                std::uint64_t seed);

/// Backend wrapper; the resolver picks the simulator configuration for a
/// request (typically by language and run).
class SimulatorBackend : public GenerationBackend {
 public:
  using Resolver = std::function<const SimulatorConfig&(const GenerationRequest&)>;
  explicit SimulatorBackend(Resolver resolver) : resolver_(std::move(resolver)) {}
  explicit SimulatorBackend(SimulatorConfig config);
  SimulatorBackend(const SimulatorBackend&) = delete;
  SimulatorBackend& operator=(const SimulatorBackend&) = delete;

  GenerationResponse generate(const GenerationRequest& request) override;

 private:
  SimulatorConfig single_;
  Resolver resolver_;
};

}  // namespace valign

#include "valign/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "valign/errors.hpp"
#include "valign/random.hpp"
#include "valign/stance_lexicon.hpp"

namespace valign {

void SimulatorConfig::validate() const {
  if (bias_blend < 0.0 || bias_blend > 1.0) throw ValidationError("bias_blend must lie in [0, 1]");
  if (noise_sd < 0.0 || !std::isfinite(noise_sd)) throw ValidationError("noise_sd must be non-negative");
  if (null_rate < 0.0 || null_rate >= 1.0) throw ValidationError("null_rate must lie in [0, 1)");
  if (n_respondents == 0) throw ValidationError("n_respondents must be positive");
  if (!find_lexicon(output_language)) {
    throw ValidationError("simulator has no stance lexicon for language '" + output_language + "'");
  }
  if (bias_blend > 0.0) {
    for (const auto& [q, v] : latent_vps.entries) {
      if (!target_vps.contains(q)) {
        throw ValidationError("simulator target vector lacks question '" + q + "' present in latent vector");
      }
    }
  }
}

double blended_probability(const SimulatorConfig& config, const std::string& question_id) {
  const auto it = config.latent_vps.entries.find(question_id);
  if (it == config.latent_vps.entries.end()) {
    throw ValidationError("simulator: unknown question_id '" + question_id + "'");
  }
  double p = it->second;
  if (config.bias_blend > 0.0) {
    const auto t = config.target_vps.entries.find(question_id);
    if (t == config.target_vps.entries.end()) {
      throw ValidationError("simulator: target vector lacks question_id '" + question_id + "'");
    }
    p = config.bias_blend * t->second + (1.0 - config.bias_blend) * p;
  }
  return p;
}

std::string simulate_generation(const SimulatorConfig& config, const std::string& question_id,
                                std::uint64_t seed) {
  const LanguageLexicon* lex = find_lexicon(config.output_language);
  if (!lex) throw ValidationError("simulator has no stance lexicon for '" + config.output_language + "'");
  Rng rng(seed);
  double p = blended_probability(config, question_id);
  if (config.noise_sd > 0.0) p += rng.normal(0.0, config.noise_sd);
  p = std::clamp(p, 0.0, 1.0);

  const std::size_t n = config.n_respondents;
  enum class S { pro, con, none };
  std::vector<S> stances(n, S::con);
  if (config.sampling == RespondentSampling::bernoulli) {
    for (auto& s : stances) {
      if (config.null_rate > 0.0 && rng.bernoulli(config.null_rate)) {
        s = S::none;
      } else {
        s = rng.bernoulli(p) ? S::pro : S::con;
      }
    }
  } else {
    const auto n_null = static_cast<std::size_t>(std::llround(config.null_rate * static_cast<double>(n)));
    const std::size_t answering = n - std::min(n_null, n);
    const auto n_pro = static_cast<std::size_t>(std::llround(p * static_cast<double>(answering)));
    for (std::size_t i = 0; i < n; ++i) {
      stances[i] = i < n_pro ? S::pro : (i < answering ? S::con : S::none);
    }
    for (std::size_t i = n; i > 1; --i) std::swap(stances[i - 1], stances[rng.below(i)]);
  }

  std::string preface = lex->preface;
  if (const auto pos = preface.find("{n}"); pos != std::string::npos) preface.replace(pos, 3, std::to_string(n));
  std::string out = preface + "\n\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& bank = stances[i] == S::pro   ? lex->pro_phrases
                       : stances[i] == S::con ? lex->con_phrases
                                              : lex->null_phrases;
    out += fmt::format("{}. {}\n", i + 1, bank[rng.below(bank.size())]);
  }
  return out;
}

SimulatorBackend::SimulatorBackend(SimulatorConfig config)
    : single_(std::move(config)), resolver_([this](const GenerationRequest&) -> const SimulatorConfig& {
        return single_;
      }) {
  single_.validate();
}

GenerationResponse SimulatorBackend::generate(const GenerationRequest& request) {
  const SimulatorConfig& config = resolver_(request);
  return {simulate_generation(config, request.question_id, request.seed)};
}

}  // namespace valign

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace valign {

struct GenerationRequest {
  std::string model_id;
  std::string prompt_text;
  double temperature = 1.0;
  std::chrono::milliseconds timeout{30000};
  // Routing metadata; live providers ignore these.
  std::string record_id;
  std::string question_id;
  std::string language;
  std::string condition;
  std::uint64_t seed = 0;
};

struct GenerationResponse {
  std::string text;
};

/// A text-generation provider. Implementations throw ProviderError for
/// failures worth retrying; generate() must be callable concurrently.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
  /// Fail fast (ValidationError) on missing credentials or bad settings.
  virtual void check_configuration() const {}
};

}  // namespace valign

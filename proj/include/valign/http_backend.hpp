#pragma once

#include <string>

#include "valign/backend.hpp"

namespace valign {

struct HttpBackendConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key_env;  // name of the environment variable holding the key
  bool require_key = true;
};

/// OpenAI-compatible chat-completions provider over HTTP(S) JSON.
class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  GenerationResponse generate(const GenerationRequest& request) override;
  void check_configuration() const override;

 private:
  HttpBackendConfig config_;
};

}  // namespace valign

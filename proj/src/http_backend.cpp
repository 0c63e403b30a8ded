#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "valign/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "valign/errors.hpp"

namespace valign {

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

void HttpBackend::check_configuration() const {
  if (config_.base_url.empty()) throw ValidationError("live backend: base_url is not set");
  if (config_.require_key) {
    if (config_.api_key_env.empty()) throw ValidationError("live backend: api_key_env is not set");
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
      throw ValidationError("live backend: environment variable " + config_.api_key_env + " is not set");
    }
  }
}

GenerationResponse HttpBackend::generate(const GenerationRequest& request) {
  httplib::Client client(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout).count();
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout).count() % 1000000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  nlohmann::json body = {
      {"model", request.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt_text}}})},
      {"temperature", request.temperature},
  };
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw ProviderError("provider returned invalid JSON");
  try {
    return {j.at("choices").at(0).at("message").at("content").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("unexpected provider response shape: ") + e.what());
  }
}

}  // namespace valign

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "valign/backend.hpp"
#include "valign/records.hpp"

namespace valign {

struct RunConfig {
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 3;
  std::chrono::milliseconds timeout{30000};
  std::uint64_t seed = 0;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds backoff_max{8000};
  double temperature = 1.0;
};

struct ElicitTask {
  std::string record_id;
  std::string model_id;
  std::string language;
  std::string question_id;
  std::string template_id;
  std::string prompt_text;
  std::string condition;
  std::size_t run = 0;
  std::size_t variant = 0;
};

struct BatchResult {
  std::vector<GenerationRecord> records;  // ordered like the task list
  std::size_t retries = 0;
  std::size_t resumed = 0;  // records taken from the journal
  std::vector<std::string> log;
};

/// Backoff before retry `attempt` (0-based): base * 2^attempt with up to
/// 50% multiplicative jitter, capped at backoff_max.
std::chrono::milliseconds retry_delay(const RunConfig& config, std::size_t attempt, double jitter_unit);

/// Runs every task against the backend with at most max_in_flight requests
/// outstanding. When `journal` is set, each finished record is appended to
/// it immediately and records already present there are not re-requested.
/// `on_persisted` is invoked after each append (used for fault injection).
BatchResult elicit_batch(GenerationBackend& backend, const std::vector<ElicitTask>& tasks,
                         const RunConfig& config, const std::optional<std::filesystem::path>& journal = {},
                         const std::function<void(std::size_t)>& on_persisted = {});

/// Repairs a journal whose final line was torn by a crash.
void truncate_torn_tail(const std::filesystem::path& journal);

}  // namespace valign

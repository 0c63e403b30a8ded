#include "valign/elicit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "valign/errors.hpp"
#include "valign/random.hpp"

namespace valign {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

}  // namespace

std::chrono::milliseconds retry_delay(const RunConfig& config, std::size_t attempt, double jitter_unit) {
  const double base = static_cast<double>(config.backoff_base.count()) *
                      std::pow(2.0, static_cast<double>(std::min<std::size_t>(attempt, 30)));
  const double jittered = base * (1.0 + 0.5 * std::clamp(jitter_unit, 0.0, 1.0));
  const double capped = std::min(jittered, static_cast<double>(config.backoff_max.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

void truncate_torn_tail(const std::filesystem::path& journal) {
  if (!std::filesystem::exists(journal)) return;
  const auto size = std::filesystem::file_size(journal);
  if (size == 0) return;
  std::ifstream in(journal, std::ios::binary);
  std::string content(size, '\0');
  in.read(content.data(), static_cast<std::streamsize>(size));
  in.close();
  if (content.back() == '\n') return;
  const auto last_nl = content.rfind('\n');
  std::filesystem::resize_file(journal, last_nl == std::string::npos ? 0 : last_nl + 1);
}

BatchResult elicit_batch(GenerationBackend& backend, const std::vector<ElicitTask>& tasks,
                         const RunConfig& config, const std::optional<std::filesystem::path>& journal,
                         const std::function<void(std::size_t)>& on_persisted) {
  backend.check_configuration();
  if (config.max_in_flight == 0) throw ValidationError("max_in_flight must be at least 1");

  BatchResult result;
  result.records.resize(tasks.size());
  std::vector<char> done(tasks.size(), 0);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!index.emplace(tasks[i].record_id, i).second) {
      throw ValidationError("duplicate record_id in batch: " + tasks[i].record_id);
    }
  }

  std::ofstream journal_out;
  if (journal) {
    if (journal->has_parent_path()) std::filesystem::create_directories(journal->parent_path());
    truncate_torn_tail(*journal);
    if (std::filesystem::exists(*journal)) {
      for (auto& rec : read_records(*journal)) {
        const auto it = index.find(rec.record_id);
        if (it == index.end() || done[it->second]) continue;
        done[it->second] = 1;
        result.records[it->second] = std::move(rec);
        ++result.resumed;
      }
    }
    journal_out.open(*journal, std::ios::binary | std::ios::app);
    if (!journal_out) throw std::runtime_error("cannot open journal " + journal->string());
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!done[i]) pending.push_back(i);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t persisted = 0;

  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const ElicitTask& task = tasks[pending[slot]];

      GenerationRequest request;
      request.model_id = task.model_id;
      request.prompt_text = task.prompt_text;
      request.temperature = config.temperature;
      request.timeout = config.timeout;
      request.record_id = task.record_id;
      request.question_id = task.question_id;
      request.language = task.language;
      request.condition = task.condition;
      request.seed = derive_seed(config.seed, task.record_id);

      GenerationRecord rec;
      rec.record_id = task.record_id;
      rec.model_id = task.model_id;
      rec.language = task.language;
      rec.question_id = task.question_id;
      rec.template_id = task.template_id;
      rec.prompt_text = task.prompt_text;
      rec.run = task.run;
      rec.variant = task.variant;

      Rng jitter(derive_seed(request.seed, std::uint64_t{0x6a177e5}));
      std::string last_error;
      bool ok = false;
      for (std::size_t attempt = 0; attempt <= config.max_retries; ++attempt) {
        try {
          rec.response_text = backend.generate(request).text;
          ok = true;
          break;
        } catch (const std::exception& e) {
          last_error = e.what();
          if (attempt == config.max_retries) break;
          const auto delay = retry_delay(config, attempt, jitter.uniform());
          {
            std::lock_guard lock(mu);
            ++result.retries;
            result.log.push_back(fmt::format("retry {} for {} after {} ms: {}", attempt + 1, task.record_id,
                                             delay.count(), last_error));
          }
          std::this_thread::sleep_for(delay);
        }
      }
      rec.timestamp = utc_timestamp();
      if (ok) {
        rec.status = RecordStatus::valid;
      } else {
        rec.status = RecordStatus::provider_error;
        rec.rejection_detail = fmt::format("failed after {} attempts: {}", config.max_retries + 1, last_error);
      }

      std::lock_guard lock(mu);
      if (journal_out.is_open()) {
        journal_out << to_json(rec).dump() << '\n';
        journal_out.flush();
      }
      if (!ok) result.log.push_back("provider_error for " + task.record_id + ": " + last_error);
      result.records[pending[slot]] = std::move(rec);
      ++persisted;
      if (on_persisted) on_persisted(persisted);
    }
  };

  const std::size_t n_threads = std::min(config.max_in_flight, pending.size());
  {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  return result;
}

}  // namespace valign

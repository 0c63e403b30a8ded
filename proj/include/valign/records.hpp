#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace valign {

enum class RecordStatus { valid, rejected_format, rejected_language, provider_error };

std::string to_string(RecordStatus status);
RecordStatus parse_record_status(const std::string& text);

struct GenerationRecord {
  std::string record_id;
  std::string model_id;
  std::string language;
  std::string question_id;
  std::string template_id;
  std::string prompt_text;
  std::string response_text;
  std::string timestamp;
  RecordStatus status = RecordStatus::valid;
  std::optional<std::string> rejection_detail;
  // Run index and prompt variant; needed to regroup records downstream.
  std::size_t run = 0;
  std::size_t variant = 0;
};

nlohmann::json to_json(const GenerationRecord& record);
GenerationRecord record_from_json(const nlohmann::json& j);

/// Reads a JSON-lines file of records. A torn final line is ignored.
std::vector<GenerationRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<GenerationRecord>& records);

}  // namespace valign

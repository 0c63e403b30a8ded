#include "valign/records.hpp"

#include <fstream>
#include <sstream>

#include "valign/errors.hpp"
#include "valign/io.hpp"

namespace valign {

std::string to_string(RecordStatus status) {
  switch (status) {
    case RecordStatus::valid:
      return "valid";
    case RecordStatus::rejected_format:
      return "rejected_format";
    case RecordStatus::rejected_language:
      return "rejected_language";
    case RecordStatus::provider_error:
      return "provider_error";
  }
  return "?";
}

RecordStatus parse_record_status(const std::string& text) {
  if (text == "valid") return RecordStatus::valid;
  if (text == "rejected_format") return RecordStatus::rejected_format;
  if (text == "rejected_language") return RecordStatus::rejected_language;
  if (text == "provider_error") return RecordStatus::provider_error;
  throw ValidationError("unknown record status '" + text + "'");
}

nlohmann::json to_json(const GenerationRecord& r) {
  nlohmann::ordered_json j;
  j["record_id"] = r.record_id;
  j["model_id"] = r.model_id;
  j["language"] = r.language;
  j["question_id"] = r.question_id;
  j["template_id"] = r.template_id;
  j["run"] = r.run;
  j["variant"] = r.variant;
  j["prompt_text"] = r.prompt_text;
  j["response_text"] = r.response_text;
  j["timestamp"] = r.timestamp;
  j["status"] = to_string(r.status);
  j["rejection_detail"] = r.rejection_detail ? nlohmann::json(*r.rejection_detail) : nlohmann::json(nullptr);
  return j;
}

GenerationRecord record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.language = j.at("language").get<std::string>();
  r.question_id = j.at("question_id").get<std::string>();
  r.template_id = j.value("template_id", "");
  r.run = j.value("run", std::size_t{0});
  r.variant = j.value("variant", std::size_t{0});
  r.prompt_text = j.value("prompt_text", "");
  r.response_text = j.value("response_text", "");
  r.timestamp = j.value("timestamp", "");
  r.status = parse_record_status(j.at("status").get<std::string>());
  if (j.contains("rejection_detail") && !j["rejection_detail"].is_null()) {
    r.rejection_detail = j["rejection_detail"].get<std::string>();
  }
  if (r.status != RecordStatus::valid && !r.rejection_detail) {
    throw ValidationError("record " + r.record_id + ": non-valid status without rejection_detail");
  }
  return r;
}

std::vector<GenerationRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open records file: " + path.string());
  std::vector<GenerationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const bool last = in.peek() == std::char_traits<char>::eof();
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (last) break;  // torn tail from an interrupted writer
      throw ParseError(path.string(), lineno, "malformed JSON record");
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<GenerationRecord>& records) {
  std::ostringstream ss;
  for (const auto& r : records) ss << to_json(r).dump() << '\n';
  io::atomic_write(path, ss.str());
}

}  // namespace valign

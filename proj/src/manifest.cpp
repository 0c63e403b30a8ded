#include "valign/manifest.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "valign/errors.hpp"
#include "valign/io.hpp"
#include "valign/random.hpp"

namespace valign {

std::filesystem::path RunManifest::path_in(const std::filesystem::path& run_dir) { return run_dir / "manifest.json"; }

RunManifest RunManifest::load(const std::filesystem::path& run_dir) {
  RunManifest m;
  const auto path = path_in(run_dir);
  if (!std::filesystem::exists(path)) return m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord r;
      r.status = s.at("status").get<std::string>();
      r.outputs = s.at("outputs").get<std::vector<std::string>>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.detail = s.value("detail", "");
      m.stages[name] = std::move(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("corrupt manifest " + path.string() + ": " + e.what());
  }
  for (auto& [name, s] : m.stages) {
    if (s.status != "complete") continue;
    for (const auto& out : s.outputs) {
      if (!std::filesystem::exists(run_dir / out)) {
        s.status = "invalid";
        s.detail = "missing artifact " + out;
        break;
      }
    }
  }
  return m;
}

void RunManifest::save(const std::filesystem::path& run_dir) const {
  nlohmann::json stages_j = nlohmann::json::object();
  for (const auto& [name, s] : stages) {
    stages_j[name] = {{"status", s.status}, {"outputs", s.outputs}, {"seed", s.seed}, {"detail", s.detail}};
  }
  const nlohmann::json j = {{"run_id", run_id},
                            {"config_hash", config_hash},
                            {"tool_version", tool_version},
                            {"stages", stages_j}};
  io::atomic_write(path_in(run_dir), j.dump(2) + "\n");
}

bool RunManifest::complete(const std::string& stage) const {
  const auto it = stages.find(stage);
  return it != stages.end() && it->second.status == "complete";
}

std::string config_hash(const std::string& config_text, std::uint64_t seed) {
  return fmt::format("{:016x}", fnv1a64(config_text + "\nseed=" + std::to_string(seed)));
}

}  // namespace valign

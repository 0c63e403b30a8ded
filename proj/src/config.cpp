#include "valign/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "valign/errors.hpp"
#include "valign/io.hpp"

namespace valign {

namespace {

using nlohmann::json;

class LineParser {
 public:
  LineParser(const std::string& line, const std::string& source, std::size_t line_no)
      : s_(line), source_(source), line_(line_no) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  bool consume(char c) {
    skip_ws();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return basic_string();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  json value() {
    skip_ws();
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

 private:
  std::uint32_t hex_code(std::size_t digits) {
    if (pos_ + digits > s_.size()) fail("truncated unicode escape");
    std::uint32_t cp = 0;
    for (std::size_t i = 0; i < digits; ++i) {
      const char h = s_[pos_++];
      cp <<= 4;
      if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail("bad hex digit in unicode escape");
    }
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid unicode scalar in escape");
    return cp;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'r': c = '\r'; break;
          case 'b': c = '\b'; break;
          case 'f': c = '\f'; break;
          case 'u':
          case 'U':
            append_utf8(out, hex_code(e == 'u' ? 4 : 8));
            continue;
          default: fail(fmt::format("unsupported escape \\{}", e));
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string literal_string() {
    ++pos_;
    const auto end = s_.find('\'', pos_);
    if (end == std::string::npos) fail("unterminated string");
    std::string out = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  json array() {
    ++pos_;
    json out = json::array();
    skip_ws();
    if (consume(']')) return out;
    for (;;) {
      out.push_back(value());
      if (consume(']')) return out;
      if (!consume(',')) fail("expected ',' or ']' in array");
      if (consume(']')) return out;  // trailing comma
    }
  }

  json number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_')) {
      ++pos_;
    }
    std::string tok = s_.substr(start, pos_ - start);
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(tok, &used);
        if (used == tok.size()) return v;
      } else {
        const long long v = std::stoll(tok, &used);
        if (used == tok.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + tok + "'");
  }

  const std::string& s_;
  const std::string& source_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json parse_toml_subset(const std::string& text, const std::string& source) {
  json root = json::object();
  json* current = &root;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    LineParser p(line, source, line_no);
    if (p.at_end()) continue;
    if (p.consume('[')) {
      const bool array_table = p.consume('[');
      const std::string name = p.key();
      if (!p.consume(']') || (array_table && !p.consume(']'))) p.fail("malformed table header");
      if (!p.at_end()) p.fail("trailing characters after table header");
      if (array_table) {
        json& arr = root[name];
        if (arr.is_null()) arr = json::array();
        if (!arr.is_array()) p.fail("'" + name + "' is not an array of tables");
        arr.push_back(json::object());
        current = &arr.back();
      } else {
        if (root.contains(name)) p.fail("duplicate table '" + name + "'");
        root[name] = json::object();
        current = &root[name];
      }
      continue;
    }
    const std::string key = p.key();
    if (!p.consume('=')) p.fail("expected '=' after key '" + key + "'");
    json v = p.value();
    if (!p.at_end()) p.fail("trailing characters after value of '" + key + "'");
    if (current->contains(key)) p.fail("duplicate key '" + key + "'");
    (*current)[key] = std::move(v);
    if (end == text.size()) break;
  }
  return root;
}

namespace {

class Reader {
 public:
  Reader(const json& node, std::string where) : node_(node), where_(std::move(where)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError(fmt::format("config: {}{}: {}", where_.empty() ? "" : where_ + ".", key, what));
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  std::string str(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!node_[key].is_string()) fail(key, "expected a string");
    return node_[key].get<std::string>();
  }
  std::string required_str(const std::string& key) {
    if (!has(key)) fail(key, "required");
    return str(key, "");
  }
  double num(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!node_[key].is_number()) fail(key, "expected a number");
    return node_[key].get<double>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!node_[key].is_number_integer() || node_[key].get<long long>() < 0) {
      fail(key, "expected a non-negative integer");
    }
    return static_cast<std::size_t>(node_[key].get<long long>());
  }
  bool flag(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!node_[key].is_boolean()) fail(key, "expected true or false");
    return node_[key].get<bool>();
  }
  std::vector<std::string> strings(const std::string& key) {
    seen_.insert(key);
    std::vector<std::string> out;
    if (!has(key)) return out;
    if (!node_[key].is_array()) fail(key, "expected an array of strings");
    for (const auto& v : node_[key]) {
      if (!v.is_string()) fail(key, "expected an array of strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  }
  void mark(const std::string& key) { seen_.insert(key); }

  void reject_unknown() const {
    for (const auto& [k, v] : node_.items()) {
      if (!seen_.count(k)) fail(k, "unknown key");
    }
  }

 private:
  const json& node_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : dir / path;
}

RespondentSampling parse_sampling(const std::string& s) {
  if (s == "bernoulli") return RespondentSampling::bernoulli;
  if (s == "expected") return RespondentSampling::expected;
  throw ValidationError("config: sampling must be 'bernoulli' or 'expected', got '" + s + "'");
}

}  // namespace

const ModelConfig* AuditConfig::find_model(const std::string& id) const {
  for (const auto& m : models) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

AuditConfig parse_config(const std::string& text, const std::filesystem::path& source_dir) {
  const json root = parse_toml_subset(text, (source_dir / "<config>").string());
  AuditConfig c;
  c.text = text;
  c.source_dir = source_dir;
  Reader r(root, "");
  c.languages = r.strings("languages");
  c.questions = resolve(source_dir, r.required_str("questions"));
  c.survey = resolve(source_dir, r.required_str("survey"));
  c.templates = resolve(source_dir, r.required_str("templates"));
  c.capability = resolve(source_dir, r.str("capability", ""));
  if (const auto g = r.str("gold", ""); !g.empty()) c.gold = resolve(source_dir, g);
  c.prompts_per_condition = r.count("prompts_per_condition", c.prompts_per_condition);
  c.variants_per_topic = r.count("variants_per_topic", c.variants_per_topic);
  c.repeats = r.count("repeats", c.repeats);
  c.n_respondents = r.count("n_respondents", c.n_respondents);
  c.seed = r.count("seed", 0);
  c.rq1_level = r.str("rq1_level", c.rq1_level);
  c.aggregation = r.str("aggregation", c.aggregation);
  c.baseline_replicates = r.count("baseline_replicates", c.baseline_replicates);
  c.resample_pairs = r.count("resample_pairs", c.resample_pairs);
  c.resample_sample_size = r.count("resample_sample_size", c.resample_sample_size);
  c.standardize = r.flag("standardize", c.standardize);
  c.robust_se = r.flag("robust_se", c.robust_se);

  c.local_countries = default_local_countries();
  if (const auto f = r.str("local_countries_file", ""); !f.empty()) {
    const auto path = resolve(source_dir, f);
    if (!std::filesystem::exists(path)) throw ValidationError("config: local_countries_file not found: " + path.string());
    for (auto& [lang, list] : load_local_countries(path)) c.local_countries[lang] = list;
  }
  r.mark("local_countries");
  if (root.contains("local_countries")) {
    if (!root["local_countries"].is_object()) r.fail("local_countries", "expected a table");
    Reader lc(root["local_countries"], "local_countries");
    for (const auto& [lang, v] : root["local_countries"].items()) c.local_countries[lang] = lc.strings(lang);
  }

  r.mark("elicit");
  if (root.contains("elicit")) {
    Reader e(root["elicit"], "elicit");
    c.elicit.max_in_flight = e.count("max_in_flight", c.elicit.max_in_flight);
    c.elicit.max_retries = e.count("max_retries", c.elicit.max_retries);
    c.elicit.timeout = std::chrono::milliseconds(
        static_cast<long long>(std::llround(e.num("timeout_s", 30.0) * 1000.0)));
    c.elicit.temperature = e.num("temperature", c.elicit.temperature);
    c.elicit.backoff_base = std::chrono::milliseconds(e.count("backoff_ms", 250));
    c.elicit.backoff_max = std::chrono::milliseconds(e.count("backoff_max_ms", 8000));
    e.reject_unknown();
  }

  r.mark("judge");
  if (root.contains("judge")) {
    Reader j(root["judge"], "judge");
    c.judge.kind = j.str("kind", c.judge.kind);
    c.judge.model_id = j.str("model_id", "");
    c.judge.base_url = j.str("base_url", "");
    c.judge.path = j.str("path", c.judge.path);
    c.judge.api_key_env = j.str("api_key_env", "");
    j.reject_unknown();
  }

  r.mark("model");
  if (root.contains("model")) {
    if (!root["model"].is_array()) r.fail("model", "use [[model]] entries");
    std::size_t k = 0;
    for (const auto& node : root["model"]) {
      Reader m(node, fmt::format("model[{}]", k++));
      ModelConfig mc;
      mc.id = m.required_str("id");
      mc.family = m.required_str("family");
      mc.backend = m.str("backend", mc.backend);
      mc.base_url = m.str("base_url", "");
      mc.path = m.str("path", mc.path);
      mc.api_key_env = m.str("api_key_env", "");
      mc.simulator.latent = m.str("latent", mc.simulator.latent);
      mc.simulator.target = m.str("target", "");
      mc.simulator.bias_blend = m.num("bias_blend", 0.0);
      mc.simulator.noise_sd = m.num("noise_sd", 0.0);
      mc.simulator.null_rate = m.num("null_rate", 0.0);
      mc.simulator.sampling = parse_sampling(m.str("sampling", "bernoulli"));
      m.reject_unknown();
      c.models.push_back(std::move(mc));
    }
  }
  r.reject_unknown();
  return c;
}

AuditConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  const auto dir = std::filesystem::absolute(path).parent_path();
  return parse_config(io::read_text(path), dir);
}

void AuditConfig::validate() const {
  const auto need_file = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) throw ValidationError(fmt::format("config: {} path is required", what));
    if (!std::filesystem::is_regular_file(p)) {
      throw ValidationError(fmt::format("config: {} file not found: {}", what, p.string()));
    }
  };
  need_file(questions, "questions");
  need_file(survey, "survey");
  need_file(templates, "templates");
  if (!capability.empty()) need_file(capability, "capability");
  if (gold) need_file(*gold, "gold");
  if (languages.empty()) throw ValidationError("config: languages must list at least one language");
  if (std::set<std::string>(languages.begin(), languages.end()).size() != languages.size()) {
    throw ValidationError("config: duplicate language");
  }
  if (prompts_per_condition == 0) throw ValidationError("config: prompts_per_condition must be positive");
  if (repeats < 2) throw ValidationError("config: repeats must be at least 2 (self-consistency needs two runs)");
  if (n_respondents == 0) throw ValidationError("config: n_respondents must be positive");
  if (rq1_level != "country" && rq1_level != "language" && rq1_level != "global") {
    throw ValidationError("config: rq1_level must be country, language or global");
  }
  if (aggregation != "mean" && aggregation != "generation") {
    throw ValidationError("config: aggregation must be 'mean' or 'generation'");
  }
  if (baseline_replicates == 0) throw ValidationError("config: baseline_replicates must be positive");
  if (elicit.max_in_flight == 0) throw ValidationError("config: elicit.max_in_flight must be at least 1");
  if (elicit.timeout.count() <= 0) throw ValidationError("config: elicit.timeout_s must be positive");
  if (!(elicit.temperature >= 0.0)) throw ValidationError("config: elicit.temperature must be >= 0");

  const auto need_env = [](const std::string& var, const std::string& who) {
    if (var.empty()) throw ValidationError("config: " + who + " needs api_key_env");
    const char* v = std::getenv(var.c_str());
    if (v == nullptr || *v == '\0') {
      throw ValidationError(fmt::format("config: environment variable {} (credentials for {}) is not set", var, who));
    }
  };
  if (judge.kind == "remote") {
    if (judge.model_id.empty() || judge.base_url.empty()) {
      throw ValidationError("config: remote judge needs model_id and base_url");
    }
    need_env(judge.api_key_env, "judge");
  } else if (judge.kind != "rule") {
    throw ValidationError("config: judge.kind must be 'rule' or 'remote'");
  }

  if (models.empty()) throw ValidationError("config: at least one [[model]] is required");
  std::set<std::string> ids;
  for (const auto& m : models) {
    if (!ids.insert(m.id).second) throw ValidationError("config: duplicate model id " + m.id);
    if (m.id == "random") throw ValidationError("config: model id 'random' is reserved for the baseline");
    if (m.id.find('|') != std::string::npos) throw ValidationError("config: model id may not contain '|'");
    if (m.backend == "openai") {
      if (m.base_url.empty()) throw ValidationError("config: model " + m.id + " needs base_url");
      need_env(m.api_key_env, "model " + m.id);
    } else if (m.backend == "simulator") {
      const auto& s = m.simulator;
      if (s.latent != "local" && s.latent != "random") PopulationSpec::parse(s.latent);
      if (!s.target.empty()) PopulationSpec::parse(s.target);
      if (s.bias_blend > 0.0 && s.target.empty()) {
        throw ValidationError("config: model " + m.id + " has bias_blend > 0 but no target");
      }
      if (s.bias_blend < 0.0 || s.bias_blend > 1.0) throw ValidationError("config: bias_blend must be in [0, 1]");
      if (s.noise_sd < 0.0) throw ValidationError("config: noise_sd must be >= 0");
      if (s.null_rate < 0.0 || s.null_rate >= 1.0) throw ValidationError("config: null_rate must be in [0, 1)");
    } else {
      throw ValidationError("config: model " + m.id + " backend must be 'simulator' or 'openai'");
    }
  }
}

}  // namespace valign

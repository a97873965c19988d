#include "cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "transaudit/error.hpp"
#include "transaudit/scores.hpp"

namespace transaudit::cli {

namespace {

const std::set<std::string, std::less<>> kSecretKeys = {"key",   "api_key", "apikey",   "auth_key",
                                                        "token", "secret",  "password", "bearer"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void reject_secrets(const toml::table& table, const std::string& prefix) {
  for (auto&& [k, v] : table) {
    const std::string name(k.str());
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto path = prefix.empty() ? name : prefix + "." + name;
    if (kSecretKeys.contains(lower)) {
      config_error("'" + path + "' looks like a credential; secrets are read from environment variables only");
    }
    if (const auto* t = v.as_table()) reject_secrets(*t, path);
    if (const auto* a = v.as_array()) {
      for (std::size_t i = 0; i < a->size(); ++i) {
        if (const auto* t = a->get(i)->as_table()) reject_secrets(*t, path + "[" + std::to_string(i) + "]");
      }
    }
  }
}

toml::table parse_toml(const std::filesystem::path& path) {
  try {
    auto table = toml::parse_file(path.string());
    reject_secrets(table, "");
    return table;
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    config_error(msg.str());
  }
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

// std::from_chars for double is missing in older libstdc++ builds.
std::optional<double> parse_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename Parse>
void from_env(Setting<T>& s, const char* name, Parse parse) {
  if (const auto v = env(name)) {
    const auto parsed = parse(*v);
    if (!parsed) config_error(std::string(name) + " has an invalid value '" + *v + "'");
    s = {*parsed, Source::env};
  }
}

template <typename T>
void from_flag(Setting<T>& s, const std::optional<T>& flag) {
  if (flag) s = {*flag, Source::flag};
}

template <typename T>
void from_file(Setting<T>& s, const toml::table& t, std::string_view path) {
  const auto node = t.at_path(path);
  if (!node) return;
  if constexpr (std::is_same_v<T, double>) {
    if (const auto v = node.value<double>()) {
      s = {*v, Source::file};
      return;
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (const auto v = node.value<std::int64_t>(); v && *v >= 0) {
      s = {static_cast<T>(*v), Source::file};
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (const auto v = node.value<std::string>()) {
      s = {*v, Source::file};
      return;
    }
  } else {
    if (const auto* a = node.as_array()) {
      T out;
      for (const auto& e : *a) {
        const auto v = e.template value<std::string>();
        if (!v) config_error(std::string(path) + " must be a list of strings");
        out.push_back(*v);
      }
      s = {std::move(out), Source::file};
      return;
    }
  }
  config_error(std::string(path) + " has the wrong type");
}

PoolMember member_from(const toml::table& t, std::size_t index) {
  PoolMember m;
  const auto where = "annotator #" + std::to_string(index + 1);
  const auto id = t["id"].value<std::string>();
  if (!id || id->empty()) config_error(where + " needs an 'id'");
  m.config.annotator_id = *id;
  m.config.model_name = t["model"].value_or(std::string{});
  m.config.endpoint = t["endpoint"].value_or(std::string{});
  m.config.credentials_env = t["credentials_env"].value_or(judge_env_name(*id, "KEY"));
  m.config.temperature = t["temperature"].value_or(0.0);
  m.config.max_retries = static_cast<int>(t["max_retries"].value_or(std::int64_t{5}));
  m.config.min_interval = std::chrono::milliseconds(t["min_interval_ms"].value_or(std::int64_t{0}));
  if (const auto mock = t["mock"].value<std::string>()) m.mock = *mock;
  return m;
}

std::vector<PoolMember> pool_from(const toml::array* arr) {
  std::vector<PoolMember> pool;
  if (arr == nullptr) return pool;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto* t = arr->get(i)->as_table();
    if (t == nullptr) config_error("annotators must be an array of tables");
    pool.push_back(member_from(*t, i));
  }
  return pool;
}

}  // namespace

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::flag: return "flag";
    case Source::env: return "env";
    case Source::file: return "config";
    case Source::builtin: return "default";
  }
  return "default";
}

std::optional<std::string> env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file, const FlagValues& flags) {
  RunConfig c;
  c.seed.value = kDefaultSeed;
  c.bootstrap.value = kDefaultBootstrap;
  c.alpha.value = kDefaultAlpha;
  c.parallelism.value = 4;
  c.engine.value = "deepl";
  c.engine_url.value = "https://api.deepl.com";
  c.source_language.value = "en";
  c.max_failure_fraction.value = 0.5;

  if (file) {
    if (!std::filesystem::exists(*file)) config_error("config file not found: " + file->string());
    c.file = *file;
    const auto t = parse_toml(*file);
    from_file(c.seed, t, "analysis.seed");
    from_file(c.bootstrap, t, "analysis.bootstrap");
    from_file(c.alpha, t, "analysis.alpha");
    from_file(c.parallelism, t, "run.parallelism");
    from_file(c.engine, t, "engine.name");
    from_file(c.engine_url, t, "engine.url");
    from_file(c.source_language, t, "engine.source_language");
    from_file(c.target_languages, t, "audit.target_languages");
    from_file(c.max_failure_fraction, t, "judge.max_failure_fraction");
    c.pool = pool_from(t.at_path("judge.annotators").as_array());
    if (const auto* style = t.at_path("report.style").as_table()) {
      std::ostringstream js;
      js << toml::json_formatter{*style};
      c.style = nlohmann::json::parse(js.str());
    }
  }

  from_env(c.seed, "TRANSAUDIT_SEED", parse_number<std::uint64_t>);
  from_env(c.bootstrap, "TRANSAUDIT_BOOTSTRAP", parse_number<std::size_t>);
  from_env(c.alpha, "TRANSAUDIT_ALPHA", parse_double);
  from_env(c.parallelism, "TRANSAUDIT_PARALLELISM", parse_number<std::size_t>);
  from_env(c.engine, "TRANSAUDIT_ENGINE", [](const std::string& s) { return std::optional(s); });
  from_env(c.engine_url, "TRANSAUDIT_ENGINE_URL", [](const std::string& s) { return std::optional(s); });
  from_env(c.target_languages, "TRANSAUDIT_TARGET_LANGUAGES",
           [](const std::string& s) { return std::optional(split_list(s)); });
  from_env(c.max_failure_fraction, "TRANSAUDIT_MAX_FAILURE_FRACTION", parse_double);

  from_flag(c.seed, flags.seed);
  from_flag(c.bootstrap, flags.bootstrap);
  from_flag(c.alpha, flags.alpha);
  from_flag(c.parallelism, flags.parallelism);
  from_flag(c.engine, flags.engine);
  from_flag(c.target_languages, flags.target_languages);
  from_flag(c.max_failure_fraction, flags.max_failure_fraction);

  if (c.bootstrap.value == 0) config_error("bootstrap must be at least 1");
  if (!(c.alpha.value > 0.0 && c.alpha.value < 1.0)) config_error("alpha must lie in (0, 1)");
  if (c.parallelism.value == 0) config_error("parallelism must be at least 1");
  if (!(c.max_failure_fraction.value >= 0.0 && c.max_failure_fraction.value <= 1.0)) {
    config_error("max_failure_fraction must lie in [0, 1]");
  }
  if (c.engine.value.empty()) config_error("engine name is empty");
  return c;
}

std::vector<PoolMember> load_pool(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) config_error("pool file not found: " + path.string());
  const auto t = parse_toml(path);
  const auto* arr = t["annotators"].as_array();
  if (arr == nullptr) arr = t.at_path("judge.annotators").as_array();
  if (arr == nullptr) config_error(path.string() + " defines no [[annotators]]");
  return pool_from(arr);
}

nlohmann::ordered_json describe(const RunConfig& c) {
  nlohmann::ordered_json j;
  auto put = [&j](const char* name, const auto& s) {
    j[name] = {{"value", s.value}, {"source", std::string(to_string(s.source))}};
  };
  j["config_file"] = c.file ? nlohmann::ordered_json(c.file->string()) : nlohmann::ordered_json(nullptr);
  put("seed", c.seed);
  put("bootstrap", c.bootstrap);
  put("alpha", c.alpha);
  put("parallelism", c.parallelism);
  put("engine", c.engine);
  put("engine_url", c.engine_url);
  put("source_language", c.source_language);
  put("target_languages", c.target_languages);
  put("max_failure_fraction", c.max_failure_fraction);
  j["engine_key"] = env("TRANSAUDIT_ENGINE_KEY") ? "<redacted>" : "<unset>";
  auto pool = nlohmann::ordered_json::array();
  for (const auto& m : c.pool) {
    pool.push_back({{"id", m.config.annotator_id},
                    {"model", m.config.model_name},
                    {"mock", m.mock ? nlohmann::ordered_json(*m.mock) : nlohmann::ordered_json(nullptr)},
                    {"key", env(m.config.credentials_env) ? "<redacted>" : "<unset>"}});
  }
  j["pool"] = std::move(pool);
  return j;
}

}  // namespace transaudit::cli

#pragma once

// Run configuration. Every value resolves as flag > environment > TOML file >
// built-in default, and remembers where it came from so the resolved set can
// be echoed. Credentials never live here: they are read from the environment
// at the point of use.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transaudit/judge.hpp"

namespace transaudit::cli {

enum class Source { flag, env, file, builtin };
std::string_view to_string(Source s) noexcept;

template <typename T>
struct Setting {
  T value{};
  Source source = Source::builtin;
};

struct PoolMember {
  AnnotatorConfig config;
  std::optional<std::string> mock;  // "mock:*" spec; no endpoint or key needed
};

struct RunConfig {
  std::optional<std::filesystem::path> file;
  Setting<std::uint64_t> seed;
  Setting<std::size_t> bootstrap;
  Setting<double> alpha;
  Setting<std::size_t> parallelism;
  Setting<std::string> engine;
  Setting<std::string> engine_url;
  Setting<std::string> source_language;
  Setting<std::vector<std::string>> target_languages;
  Setting<double> max_failure_fraction;
  std::vector<PoolMember> pool;  // from [[judge.annotators]] unless --pool is given
  nlohmann::json style;          // [report.style], empty when absent
};

/// Values given on the command line; absent means "not given".
struct FlagValues {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bootstrap;
  std::optional<double> alpha;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> engine;
  std::optional<std::vector<std::string>> target_languages;
  std::optional<double> max_failure_fraction;
};

/// Reads the TOML file (when given), the TRANSAUDIT_* environment and the
/// flags, and validates the result. Throws ConfigError.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file, const FlagValues& flags);

/// Pool definition from a TOML file holding `[[annotators]]` tables.
std::vector<PoolMember> load_pool(const std::filesystem::path& path);

/// Resolved settings with their sources. Secrets are never part of the
/// config, so only their presence is reported.
nlohmann::ordered_json describe(const RunConfig& config);

/// Reads an environment variable; empty values count as unset.
std::optional<std::string> env(const std::string& name);

}  // namespace transaudit::cli

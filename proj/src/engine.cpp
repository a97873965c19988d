#include "transaudit/engine.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "transaudit/error.hpp"
#include "transaudit/fragments.hpp"

namespace transaudit {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace

std::string TranslationEngine::translate_one(const std::string& serialized, std::string_view source_lang,
                                             std::string_view target_lang, std::string_view ignore_tag) {
  auto out = translate(std::span<const std::string>(&serialized, 1), source_lang, target_lang, ignore_tag);
  if (out.size() != 1) throw Error(ErrorKind::EngineUnavailable, "engine returned no translation");
  return std::move(out.front());
}

std::vector<std::string> split_on_marker(std::string_view serialized) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = serialized.find(kFragmentMarker, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(serialized.substr(start));
      return parts;
    }
    parts.emplace_back(serialized.substr(start, pos - start));
    start = pos + kFragmentMarker.size();
  }
}

std::string join_with_marker(std::span<const std::string> parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += kFragmentMarker;
    out += parts[i];
  }
  return out;
}

DeeplEngine::DeeplEngine(DeeplConfig config) : config_(std::move(config)) {}

std::string DeeplEngine::id() const { return "deepl:" + config_.base_url; }

std::vector<std::string> DeeplEngine::translate(std::span<const std::string> texts, std::string_view source_lang,
                                                std::string_view target_lang, std::string_view ignore_tag) {
  if (texts.empty()) return {};
  std::vector<std::pair<std::string, std::string>> form;
  for (const auto& t : texts) form.emplace_back("text", t);
  form.emplace_back("source_lang", upper(source_lang));
  form.emplace_back("target_lang", upper(target_lang));
  form.emplace_back("tag_handling", "xml");
  form.emplace_back("ignore_tags", std::string(ignore_tag));
  const auto body = http::form_encode(form);
  const http::Headers headers{{"Authorization", "DeepL-Auth-Key " + config_.api_key}};
  const auto url = http::join_url(config_.base_url, "/v2/translate");

  const auto response = http::with_retries(config_.retry, [&] {
    return http::post(url, headers, body, "application/x-www-form-urlencoded", config_.timeout);
  });
  switch (http::classify(response)) {
    case http::Outcome::ok: break;
    case http::Outcome::auth:
      throw Error(ErrorKind::AuthFailure, fmt::format("engine rejected credentials (HTTP {})", response.status));
    case http::Outcome::retryable:
      throw Error(ErrorKind::EngineUnavailable,
                  fmt::format("engine unavailable after {} attempts (HTTP {}{}{})", config_.retry.max_attempts,
                              response.status, response.error.empty() ? "" : ", ", response.error));
    case http::Outcome::fatal:
      throw Error(ErrorKind::EngineUnavailable,
                  fmt::format("engine refused request (HTTP {}): {}", response.status, response.body));
  }

  std::vector<std::string> out;
  try {
    const auto j = nlohmann::json::parse(response.body);
    for (const auto& t : j.at("translations")) out.push_back(t.at("text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::EngineUnavailable, std::string("malformed engine response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorKind::EngineUnavailable,
                fmt::format("engine returned {} translations for {} texts", out.size(), texts.size()));
  }
  return out;
}

MockEngine::MockEngine(Transform transform, std::string name)
    : transform_(std::move(transform)), name_(std::move(name)) {}

std::unique_ptr<MockEngine> MockEngine::tagging() {
  return std::make_unique<MockEngine>(
      [](const std::string& serialized, std::string_view lang) {
        auto parts = split_on_marker(serialized);
        for (auto& p : parts) {
          if (!p.empty()) p = fmt::format("[{}] {}", lang, p);
        }
        return join_with_marker(parts);
      },
      "mock:tag");
}

std::unique_ptr<MockEngine> MockEngine::identity() {
  return std::make_unique<MockEngine>([](const std::string& s, std::string_view) { return s; }, "mock:identity");
}

std::unique_ptr<MockEngine> MockEngine::reversing() {
  return std::make_unique<MockEngine>(
      [](const std::string& serialized, std::string_view) {
        auto parts = split_on_marker(serialized);
        std::reverse(parts.begin(), parts.end());
        return join_with_marker(parts);
      },
      "mock:reverse");
}

std::unique_ptr<MockEngine> MockEngine::dropping_marker() {
  return std::make_unique<MockEngine>(
      [](const std::string& serialized, std::string_view) {
        std::string out = serialized;
        if (const auto pos = out.find(kFragmentMarker); pos != std::string::npos) {
          out.erase(pos, kFragmentMarker.size());
        }
        return out;
      },
      "mock:drop-marker");
}

std::unique_ptr<MockEngine> MockEngine::unavailable() {
  return std::make_unique<MockEngine>(
      [](const std::string&, std::string_view) -> std::string {
        throw Error(ErrorKind::EngineUnavailable, "mock engine is down");
      },
      "mock:unavailable");
}

std::unique_ptr<MockEngine> MockEngine::from_spec(std::string_view spec) {
  if (spec == "mock" || spec == "mock:tag") return tagging();
  if (spec == "mock:identity") return identity();
  if (spec == "mock:reverse") return reversing();
  if (spec == "mock:drop-marker") return dropping_marker();
  if (spec == "mock:unavailable") return unavailable();
  throw Error(ErrorKind::ConfigError, "unknown mock engine '" + std::string(spec) + "'");
}

std::vector<std::string> MockEngine::translate(std::span<const std::string> texts, std::string_view,
                                               std::string_view target_lang, std::string_view) {
  ++calls_;
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(transform_(t, target_lang));
  texts_ += texts.size();
  return out;
}

}  // namespace transaudit

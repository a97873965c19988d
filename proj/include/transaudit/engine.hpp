#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "transaudit/http.hpp"

namespace transaudit {

/// A machine-translation backend. One call carries several serialized texts
/// for the same language pair and returns them in order. Implementations
/// must not translate inside the ignored tag.
class TranslationEngine {
 public:
  virtual ~TranslationEngine() = default;

  [[nodiscard]] virtual std::string id() const = 0;

  /// Throws Error(AuthFailure) on rejected credentials and
  /// Error(EngineUnavailable) once retries are exhausted.
  virtual std::vector<std::string> translate(std::span<const std::string> texts, std::string_view source_lang,
                                             std::string_view target_lang, std::string_view ignore_tag) = 0;

  std::string translate_one(const std::string& serialized, std::string_view source_lang,
                            std::string_view target_lang, std::string_view ignore_tag);
};

struct DeeplConfig {
  std::string base_url = "https://api.deepl.com";
  std::string api_key;
  http::RetryPolicy retry;
  std::chrono::seconds timeout{60};
};

/// DeepL-compatible `/v2/translate` client (form body, tag_handling=xml).
class DeeplEngine final : public TranslationEngine {
 public:
  explicit DeeplEngine(DeeplConfig config);

  [[nodiscard]] std::string id() const override;
  std::vector<std::string> translate(std::span<const std::string> texts, std::string_view source_lang,
                                     std::string_view target_lang, std::string_view ignore_tag) override;

 private:
  DeeplConfig config_;
};

/// Deterministic in-process engine. The transform sees one whole serialized
/// text (markers included) and the target language.
class MockEngine final : public TranslationEngine {
 public:
  using Transform = std::function<std::string(const std::string& serialized, std::string_view target_lang)>;

  explicit MockEngine(Transform transform, std::string name = "mock");

  /// Prefixes every fragment with "[<lang>] "; markers and empty fragments are kept.
  static std::unique_ptr<MockEngine> tagging();
  static std::unique_ptr<MockEngine> identity();
  /// Reverses fragment order inside each text.
  static std::unique_ptr<MockEngine> reversing();
  /// Removes the first marker, merging two fragments.
  static std::unique_ptr<MockEngine> dropping_marker();
  /// Every call fails with EngineUnavailable.
  static std::unique_ptr<MockEngine> unavailable();
  /// "mock", "mock:tag", "mock:identity", "mock:reverse", "mock:drop-marker", "mock:unavailable".
  static std::unique_ptr<MockEngine> from_spec(std::string_view spec);

  [[nodiscard]] std::string id() const override { return name_; }
  std::vector<std::string> translate(std::span<const std::string> texts, std::string_view source_lang,
                                     std::string_view target_lang, std::string_view ignore_tag) override;

  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }
  [[nodiscard]] std::size_t texts_translated() const noexcept { return texts_.load(); }

 private:
  Transform transform_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> texts_{0};
};

/// Splits a serialized text on the fragment marker without unescaping.
std::vector<std::string> split_on_marker(std::string_view serialized);
std::string join_with_marker(std::span<const std::string> parts);

}  // namespace transaudit

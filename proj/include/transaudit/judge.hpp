#pragma once

// LLM-as-a-judge span annotation and its majority-vote aggregation.
//
// Each annotator returns {"errors":[{"span","category","severity"}]}. MQM
// categories collapse into three buckets (A+M, F, O). For every bucket and
// severity an item gets maj = 1 when at least `threshold` annotators flagged
// a span of that kind; when both severities reach majority only major is
// kept. An item is CLEAN when at least `threshold` annotators returned no span.
//
// Annotators whose output could not be parsed (or whose endpoint failed)
// abstain. The threshold is floor(M/2) + 1 for a pool of M (2 of 3) and does
// not shrink: with one abstention out of three the remaining two must agree,
// with two abstentions the item is excluded from the rates and tallied.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transaudit/corpus.hpp"
#include "transaudit/http.hpp"

namespace transaudit {

enum class Bucket { accuracy, fluency, other };  // A+M, F, O
enum class Severity { major, minor };
inline constexpr std::array<Bucket, 3> kBuckets = {Bucket::accuracy, Bucket::fluency, Bucket::other};
inline constexpr std::array<Severity, 2> kSeverities = {Severity::major, Severity::minor};

std::string_view to_string(Bucket b) noexcept;  // "A+M", "F", "O"
std::string_view to_string(Severity s) noexcept;
std::optional<Bucket> parse_bucket(std::string_view s);
std::optional<Severity> parse_severity(std::string_view s);  // case-insensitive

struct ErrorSpan {
  std::string span_text;
  std::string category;
  Severity severity = Severity::minor;

  bool operator==(const ErrorSpan&) const = default;
};

enum class ParseStatus { ok, repaired, failed };
std::string_view to_string(ParseStatus s) noexcept;

struct ItemAnnotation {
  ItemKey key;
  std::string annotator_id;
  std::vector<ErrorSpan> spans;
  std::string raw_response;  // last response received, verbatim
  std::vector<std::string> raw_attempts;  // every response, in order
  ParseStatus parse_status = ParseStatus::ok;
  std::string error;  // set when the call itself failed

  [[nodiscard]] bool abstains() const noexcept { return parse_status == ParseStatus::failed; }
};

nlohmann::ordered_json to_json(const ItemAnnotation& a);
ItemAnnotation annotation_from_json(const nlohmann::json& j);
std::vector<ItemAnnotation> load_annotations(const std::filesystem::path& path);

/// MQM category -> bucket. Lookup is case-insensitive and tries the full
/// string, then the family before '/', then the part after '/'. Unknown
/// categories fall into O with a logged warning.
class CategoryMap {
 public:
  static const CategoryMap& builtin();
  /// `{"A+M": [...], "F": [...], "O": [...]}`
  static CategoryMap from_json(const nlohmann::json& j);
  static CategoryMap load(const std::filesystem::path& path);

  [[nodiscard]] Bucket map(std::string_view category) const;
  [[nodiscard]] bool known(std::string_view category) const;
  /// Every configured category, sorted, for the prompt vocabulary.
  [[nodiscard]] std::vector<std::string> vocabulary() const;

 private:
  std::optional<Bucket> lookup(std::string_view category) const;
  std::map<std::string, Bucket> table_;
};

Bucket map_category(std::string_view category, const CategoryMap& map = CategoryMap::builtin());

// -- prompting ---------------------------------------------------------------

struct FewShot {
  std::string source_language;
  std::string target_language;
  std::string source;
  std::string translation;
  std::string response;  // the expected JSON answer
};

/// Template text with {source_language} {target_language} {source}
/// {translation} {categories} {severity_rule} {schema} {examples} placeholders.
struct PromptTemplate {
  std::string text;

  static const PromptTemplate& builtin();
  static PromptTemplate load(const std::filesystem::path& path);
};

const std::vector<FewShot>& builtin_few_shots();
std::vector<FewShot> load_few_shots(const std::filesystem::path& path);

extern const std::string_view kSeverityRule;
extern const std::string_view kOutputSchema;

/// Text shown to the judge for one item: the question, then one line per choice
/// (or the answer for generative items).
std::string render_segment(const BenchmarkItem& item);

/// Errors: MissingSource when `source` is null or belongs to another sample.
std::string build_prompt(const BenchmarkItem& item, const BenchmarkItem* source, std::span<const FewShot> few_shots,
                         const PromptTemplate& tmpl = PromptTemplate::builtin(),
                         const CategoryMap& categories = CategoryMap::builtin());

// -- parsing -----------------------------------------------------------------

struct ParsedResponse {
  std::vector<ErrorSpan> spans;
  ParseStatus status = ParseStatus::ok;
};

/// Strict parse of `{"errors":[...]}`. Errors: ParseFailed.
std::vector<ErrorSpan> parse_spans_strict(std::string_view text);
/// Strict parse, then one repair (strip code fences, take the first balanced
/// JSON object, strict parse again). Failure yields status = failed.
ParsedResponse parse_response(std::string_view raw);

// -- annotators --------------------------------------------------------------

struct AnnotatorConfig {
  std::string annotator_id;
  std::string endpoint;    // chat-completions base URL; TRANSAUDIT_JUDGE_<ID>_URL overrides
  std::string model_name;
  std::string credentials_env;  // defaults to TRANSAUDIT_JUDGE_<ID>_KEY
  double temperature = 0.0;
  int max_retries = 5;
  std::chrono::milliseconds min_interval{0};  // per-endpoint pacing
};

/// "TRANSAUDIT_JUDGE_<ID>_<SUFFIX>" with the id upper-cased and every
/// non-alphanumeric character replaced by '_'.
std::string judge_env_name(std::string_view annotator_id, std::string_view suffix);

/// Errors: ConfigError for an empty or duplicate id, or a pool smaller than 2.
void validate_pool(std::span<const AnnotatorConfig> pool);

class Annotator {
 public:
  virtual ~Annotator() = default;
  [[nodiscard]] virtual std::string id() const = 0;
  /// Raw model text. Throws AuthFailure, RateLimited or EngineUnavailable.
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Chat-completions client: POST {endpoint}/chat/completions with a bearer key.
class ChatAnnotator final : public Annotator {
 public:
  ChatAnnotator(AnnotatorConfig config, std::string api_key, http::RetryPolicy retry = {});
  [[nodiscard]] std::string id() const override { return config_.annotator_id; }
  std::string complete(const std::string& prompt) override;

 private:
  AnnotatorConfig config_;
  std::string api_key_;
  http::RetryPolicy retry_;
  std::mutex pacing_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// In-process annotator for tests and dry runs.
class MockAnnotator final : public Annotator {
 public:
  using Respond = std::function<std::string(const std::string& prompt, std::size_t call_index)>;
  MockAnnotator(std::string id, Respond respond);

  /// "mock:clean", "mock:seeded", "mock:garbage", "mock:down", "mock:prose".
  static std::unique_ptr<MockAnnotator> from_spec(std::string id, std::string_view spec);

  [[nodiscard]] std::string id() const override { return id_; }
  std::string complete(const std::string& prompt) override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::string id_;
  Respond respond_;
  std::atomic<std::size_t> calls_{0};
};

/// Asks once, re-asks once on a parse failure. Transport failures after
/// retries give an abstaining annotation with `error` set; AuthFailure propagates.
ItemAnnotation call_annotator(const ItemKey& key, const std::string& prompt, Annotator& annotator);

// -- aggregation -------------------------------------------------------------

std::size_t majority_threshold(std::size_t pool_size);

struct MajorityVerdict {
  ItemKey key;
  std::size_t pool_size = 0;
  std::size_t valid = 0;  // non-abstaining annotators
  bool excluded = false;  // fewer valid annotators than the threshold
  // Indexed [bucket][severity]. `raw` is before severity precedence.
  std::array<std::array<bool, 2>, 3> raw{};
  std::array<std::array<bool, 2>, 3> maj{};
  std::array<bool, 3> present{};
  bool clean = false;

  [[nodiscard]] bool majority(Bucket b, Severity s) const { return maj[static_cast<int>(b)][static_cast<int>(s)]; }
};

/// All annotations must share the key (KeyMismatch otherwise). Requires a
/// non-empty set. The pool size defaults to the number of annotations.
MajorityVerdict majority_vote(std::span<const ItemAnnotation> annotations,
                              const CategoryMap& categories = CategoryMap::builtin(),
                              std::optional<std::size_t> pool_size = std::nullopt);

/// present(T) = raw(T, major) or raw(T, minor).
std::array<bool, 3> collapse_severity(const MajorityVerdict& v);

/// Groups annotations by key (sorted) and votes on each group.
std::vector<MajorityVerdict> aggregate(std::span<const ItemAnnotation> annotations, std::size_t pool_size,
                                       const CategoryMap& categories = CategoryMap::builtin());

nlohmann::ordered_json to_json(const MajorityVerdict& v);

struct RateCell {
  std::string language;
  Dataset dataset{};
  std::size_t n = 0;          // items counted (excluded ones removed)
  std::size_t excluded = 0;
  std::array<std::size_t, 3> present_count{};
  std::size_t clean_count = 0;
  // Per 1,000 items; absent when n = 0.
  std::optional<std::array<double, 3>> rate;
  std::optional<double> clean_rate;
};

struct SeverityShare {
  Dataset dataset{};
  Bucket bucket{};
  std::size_t major = 0;  // agreed-major items after precedence
  std::size_t minor = 0;
  // Percentages at one decimal; minor = 100 - major so they always sum to 100.
  std::optional<double> major_share;
  std::optional<double> minor_share;
};

struct ErrorRates {
  std::vector<RateCell> cells;  // sorted by (language, dataset)
  std::vector<SeverityShare> shares;  // sorted by (dataset, bucket)
  std::size_t excluded_total = 0;
};

ErrorRates error_rates(std::span<const MajorityVerdict> verdicts);

nlohmann::ordered_json to_json(const ErrorRates& r);
ErrorRates rates_from_json(const nlohmann::json& j);
/// One row per cell: language,dataset,n,excluded,A+M,F,O,clean (rates, 6 decimals).
std::string rates_csv(const ErrorRates& r);
std::string shares_csv(const ErrorRates& r);

// -- orchestration -----------------------------------------------------------

struct JudgeOptions {
  std::size_t parallelism = 1;
  double max_failure_fraction = 0.5;
  std::optional<std::filesystem::path> store;  // annotations.jsonl; resumes when it exists
  std::vector<FewShot> few_shots = builtin_few_shots();
  const PromptTemplate* prompt = nullptr;     // builtin when null
  const CategoryMap* categories = nullptr;    // builtin when null
};

struct JudgeRun {
  std::vector<ItemAnnotation> annotations;  // resumed + new, sorted by (key, annotator order)
  std::size_t calls = 0;                    // (item, annotator) pairs attempted in this run
  std::size_t failed_calls = 0;
  std::size_t resumed = 0;
};

/// Annotates every non-English item of `targets` with every annotator. Every
/// source is resolved before the first call (MissingSource). Completed pairs
/// found in the store are not requested again. Throws EngineUnavailable after
/// persisting when more than max_failure_fraction of this run's calls failed.
JudgeRun run_judging(const Corpus& english, const Corpus& targets, std::span<Annotator* const> pool,
                     const JudgeOptions& options = {});

}  // namespace transaudit

#pragma once

// Manifest-driven, field-level re-translation of defective items.
//
// plan_repair       manifest + corpora -> fragment batches (English source text)
// translate_batch   cache lookup, request packing, engine calls with retries
// apply_updates     write translated fragments back, one diagnostics record per field
// validate_post_translation  re-check completeness, queue survivors for manual review

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transaudit/audit.hpp"
#include "transaudit/corpus.hpp"
#include "transaudit/engine.hpp"
#include "transaudit/fragments.hpp"

namespace transaudit {

enum class ScopeMode { manifest, full_split };

struct ManifestEntry {
  ItemKey key;  // key.id is empty for split-wide entries
  std::optional<std::vector<std::string>> fields;  // absent: every defective field

  [[nodiscard]] bool split_wide() const noexcept { return key.id.empty(); }
};

struct RepairManifest {
  std::vector<ManifestEntry> entries;
  ScopeMode scope_mode = ScopeMode::manifest;  // full_split when every entry is split-wide
};

/// JSONL lines `{"language","dataset","subset","split","id","fields":[...]}`.
/// A line without "id" selects the whole (language, dataset, subset, split).
RepairManifest parse_manifest(std::istream& in);
RepairManifest load_manifest(const std::filesystem::path& path);

/// (target language, serialized source) -> serialized target. With a
/// persistence path the cache is an append-only JSONL file, loaded fully on
/// construction; later lines win. All access goes through one mutex.
class TranslationCache {
 public:
  TranslationCache() = default;
  explicit TranslationCache(std::filesystem::path persistence);

  [[nodiscard]] std::optional<std::string> lookup(const std::string& target_language,
                                                  const std::string& source) const;
  void store(const std::string& target_language, const std::string& source, const std::string& target);
  [[nodiscard]] std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::string> entries_;
  std::optional<std::filesystem::path> path_;
};

enum class ContinuationMode { none, prefix_context };

/// Fragment 0 of a prefixed batch carries the context; if the question was not
/// requested its slot is kContextSlot and is never written back.
inline constexpr std::string_view kContextSlot = "#context";

struct FragmentBatch {
  ItemKey source_key;  // key of the target-language item being repaired
  std::vector<std::string> fragments;
  std::vector<FieldSlot> slots;
  std::string serialized;
  std::string target_language;
  bool context_prefixed = false;
  // Set when the target item does not exist yet; the English item it is built from.
  std::optional<BenchmarkItem> create_from;
};

struct UnresolvedEntry {
  ItemKey key;
  std::string reason;
};

struct RepairPlan {
  std::vector<FragmentBatch> batches;
  std::vector<UnresolvedEntry> unresolved;
};

struct PlanOptions {
  ContinuationMode continuation = ContinuationMode::none;
};

/// Resolves every entry against the English corpus before any engine call.
/// Overlapping field selections for one item raise WriteConflict.
RepairPlan plan_repair(const Corpus& target, const Corpus& english, const RepairManifest& manifest,
                       const PlanOptions& options = {});

/// Fields of `item` that are empty or structurally inconsistent with `source`.
std::vector<std::string> defective_fields(const BenchmarkItem* item, const BenchmarkItem& source);

/// HellaSwag-style continuation options: with prefix_context every choice is
/// prefixed by the context (joined with one space). `none` is the identity.
BenchmarkItem reformat_continuation_options(const BenchmarkItem& item, ContinuationMode mode);

/// Removes the translated context from the front of a translated, prefixed
/// option. Throws PrefixStripFailure when the option does not start with the
/// context or nothing remains.
std::string strip_translated_context(std::string_view translated_context, std::string_view translated_option);

enum class BatchStatus { ok, content_failure, engine_failure };

struct TranslatedBatch {
  FragmentBatch batch;
  std::vector<std::string> fragments;  // valid when status == ok
  BatchStatus status = BatchStatus::ok;
  bool cache_hit = false;
  std::string engine_id;
  std::string error;
};

struct TranslateOptions {
  std::string source_language = "en";
  std::size_t max_payload_bytes = 100 * 1024;
  std::size_t max_texts_per_request = 50;
  std::size_t parallelism = 1;
  std::chrono::milliseconds min_request_interval{0};
};

struct TranslateOutcome {
  std::vector<TranslatedBatch> batches;  // same order as the input
  std::size_t engine_calls = 0;
  std::size_t cache_hits = 0;
  bool engine_exhausted = false;
};

/// Greedy packing of payload indices into requests bounded by bytes and count.
/// A payload larger than the byte budget travels alone.
std::vector<std::vector<std::size_t>> pack_requests(std::span<const std::string> payloads,
                                                    std::size_t max_bytes, std::size_t max_texts);

/// Number of engine requests a run would issue after cache hits.
std::size_t estimate_engine_calls(std::span<const FragmentBatch> batches, const TranslationCache& cache,
                                  const TranslateOptions& options);

/// AuthFailure propagates; other engine failures turn the affected batches
/// into engine_failure results.
TranslateOutcome translate_batch(std::span<const FragmentBatch> batches, TranslationEngine& engine,
                                 TranslationCache& cache, const TranslateOptions& options = {});

enum class DiagnosticStatus { updated, unchanged, failed, manual_queue };
std::string_view to_string(DiagnosticStatus s) noexcept;

struct DiagnosticsRecord {
  ItemKey key;
  std::string field;
  std::string before;
  std::string after;
  std::string engine_id;
  bool cache_hit = false;
  std::string timestamp;  // UTC, ISO 8601
  DiagnosticStatus status = DiagnosticStatus::unchanged;
  std::string note;
};

ordered_json to_json(const DiagnosticsRecord& r);
void write_diagnostics(std::span<const DiagnosticsRecord> records, std::ostream& out);

using Clock = std::function<std::string()>;
/// Current UTC time; honours SOURCE_DATE_EPOCH when set.
std::string utc_timestamp();

struct UpdateResult {
  Corpus corpus;
  std::vector<DiagnosticsRecord> diagnostics;
};

/// Writes successful batches back; failed batches leave their items untouched
/// and produce failed/manual_queue records. New items are appended after the
/// existing ones in batch order.
UpdateResult apply_updates(const Corpus& corpus, std::span<const TranslatedBatch> translated,
                           const RepairManifest& manifest, const Clock& clock = utc_timestamp);

/// Re-runs the completeness check on `keys` (every item when empty) and
/// appends a manual_queue record for each survivor.
Roster validate_post_translation(const Corpus& corpus, std::vector<DiagnosticsRecord>& diagnostics,
                                 std::span<const ItemKey> keys = {}, const Clock& clock = utc_timestamp);

}  // namespace transaudit

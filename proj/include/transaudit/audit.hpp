#pragma once

// Structural integrity checks over a multilingual benchmark suite:
//
//   A  answer-index alignment with the English original
//   B  field completeness (question, choices / answer)
//   C  split and subset placement mirrors English
//   D  every sample exists in every configured target language
//
// Counts per (dataset, split):
//   N_en  English samples
//   N_T   non-English samples present
//   N_C   non-English samples violating B
//   N_L   non-English samples, not excluded by B or C, whose sample id is
//         missing from at least one configured target language
//
// Note on N_T: it counts the non-English samples present, so splits with
// missing samples report their true size rather than L * N_en.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "transaudit/corpus.hpp"

namespace transaudit {

using Roster = std::vector<ItemKey>;

struct AlignmentResult {
  Roster misaligned;
  Roster unmatched;  // target items without an English counterpart
};

/// Criterion A. Both corpora must hold the same dataset, else SchemaMismatch.
/// Multi-target answers compare as sets.
AlignmentResult check_answer_alignment(const Corpus& target, const Corpus& english);

/// Criterion B over the non-English items of `corpus` that belong to `schema`.
Roster check_field_completeness(const Corpus& corpus, const TaskSchema& schema);

/// Criterion C: a target item is listed when its (dataset, id) exists in English
/// but never under the item's own (split, subset).
Roster check_split_consistency(const Corpus& target, const Corpus& english);

/// Criterion D. `exclusions` are never listed; they still count as present when
/// checking whether a language holds a sample.
Roster check_cross_language_coverage(std::span<const Corpus> corpora,
                                     std::span<const std::string> target_languages,
                                     const Roster& exclusions);

struct GroupReport {
  Dataset dataset{};
  Split split{};
  std::size_t n_en = 0;
  std::size_t n_t = 0;
  std::size_t n_c = 0;
  std::size_t n_l = 0;
  bool criterion_a_ok = true;
  // English samples with at least one incomplete translation, and how many of
  // those are incomplete in two or more target languages.
  std::size_t english_with_missing_content = 0;
  std::size_t missing_content_multi_language = 0;

  Roster misaligned;
  Roster unmatched;
  Roster incomplete;
  Roster inconsistent;
  Roster uncovered;
};

struct AuditReport {
  std::vector<std::string> target_languages;
  std::vector<GroupReport> groups;  // sorted by (dataset, split)

  [[nodiscard]] bool clean() const;
  [[nodiscard]] const GroupReport* group(Dataset d, Split s) const;
};

struct AuditOptions {
  /// Empty means: every non-English language seen in the target corpora.
  std::vector<std::string> target_languages;
};

/// Runs A-D and aggregates per (dataset, split). `corpora` hold translated
/// items (English items found there are ignored); `english` the originals.
AuditReport audit(std::span<const Corpus> corpora, std::span<const Corpus> english,
                  const AuditOptions& options = {});

/// Complete rosters, counts, criterion_A_ok and secondary statistics.
nlohmann::ordered_json to_json(const AuditReport& report);
/// Plain-text table (Dataset, Split, N_en, N_T, N_C, N_L) followed by rosters
/// capped at `roster_cap` keys each.
std::string summary_table(const AuditReport& report, std::size_t roster_cap = 100);

struct LeakageParams {
  std::size_t context_pool_size = 0;  // |S|
  std::size_t eval_split_size = 0;    // |val|
  std::size_t shots = 0;              // k
  double true_accuracy = 0.0;
};

/// Expected accuracy inflation in percentage points when the k-shot context
/// is drawn from a pool that overlaps the evaluation split:
/// 100 * (k / |val|) * (1 - acc). Throws DomainError on invalid parameters.
double estimate_leakage_inflation(const LeakageParams& p);

}  // namespace transaudit

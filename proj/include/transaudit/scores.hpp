#pragma once

// Per-segment QE score ingestion and the comparisons built on it.
//
// Score records, one JSON object per line:
//   {"language","dataset","subset","split","id","system","mode","score",
//    "word_count"?, "target_text"?}
// mode is "ref_free" or "ref_based"; score lies in [0, 1].

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transaudit/corpus.hpp"
#include "transaudit/stats.hpp"

namespace transaudit {

enum class ScoreMode { ref_free, ref_based };
std::string_view to_string(ScoreMode m) noexcept;
std::optional<ScoreMode> parse_score_mode(std::string_view s);

struct SegmentScore {
  ItemKey key;
  std::string system;
  ScoreMode mode = ScoreMode::ref_free;
  double score = 0.0;
  std::optional<std::string> target_text;
  std::optional<std::size_t> word_count;  // filled from target_text when not supplied
};

/// Errors: MalformedLine, MissingKeyField, ScoreOutOfRange, DuplicateScore
/// (same key, system and mode twice).
std::vector<SegmentScore> load_scores(std::istream& in);
std::vector<SegmentScore> load_scores(const std::filesystem::path& path);

/// Maximal runs of non-whitespace code points.
std::size_t word_count(std::string_view text);

struct CellSummary {
  std::string system;
  std::string language;
  Dataset dataset{};
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  std::optional<double> median_word_count;  // absent when no record has a length
  std::optional<double> spearman_rho;       // absent for n < 3 or constant input
  std::optional<double> spearman_p;
};

/// One cell: all records share system, language and dataset. Errors: InsufficientData (n = 0).
CellSummary cell_summary(std::span<const SegmentScore> scores);

/// Cell summaries for every (system, language, dataset) in `mode`, sorted by that triple.
std::vector<CellSummary> landscape(std::span<const SegmentScore> scores, ScoreMode mode = ScoreMode::ref_free);

struct ScorePair {
  ItemKey key;
  double a = 0.0;
  double b = 0.0;
};

struct PairedSet {
  std::string system_a;
  std::string system_b;
  ScoreMode mode = ScoreMode::ref_free;
  std::vector<ScorePair> pairs;  // sorted by key

  [[nodiscard]] std::size_t n() const noexcept { return pairs.size(); }
};

/// Keys present for both systems in `mode`. An empty overlap is logged and
/// returned with n = 0.
PairedSet paired_overlap(std::span<const SegmentScore> scores, const std::string& system_a,
                         const std::string& system_b, ScoreMode mode);
/// Same, taking the mode from the records. Errors: ModeMismatch when the
/// records of the two systems carry both modes.
PairedSet paired_overlap(std::span<const SegmentScore> scores, const std::string& system_a,
                         const std::string& system_b);

/// k-way aligned overlap: scores[j][i] is system j's score on keys[i].
struct AlignedSet {
  std::vector<std::string> systems;
  ScoreMode mode = ScoreMode::ref_free;
  std::vector<ItemKey> keys;
  std::vector<std::vector<double>> scores;
};

/// Errors: DomainError for fewer than two systems.
AlignedSet aligned_overlap(std::span<const SegmentScore> scores, std::span<const std::string> systems,
                           ScoreMode mode);

struct DeltaWin {
  double delta = 0.0;
  double win_rate = 0.0;  // strict wins / n
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
};

/// Errors: InsufficientData (n = 0).
DeltaWin median_delta_and_winrate(const PairedSet& p);

inline constexpr std::size_t kDefaultBootstrap = 5000;
inline constexpr double kDefaultAlpha = 0.05;
inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct DeltaResult {
  std::string system_a;
  std::string system_b;
  ScoreMode mode = ScoreMode::ref_free;
  std::string language;  // grouping labels, empty when not grouped
  std::optional<Dataset> dataset;
  std::size_t n = 0;
  double median_a = 0.0;
  double median_b = 0.0;
  double delta = 0.0;
  double win_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = kDefaultAlpha;
  std::size_t bootstrap = kDefaultBootstrap;
  std::uint64_t seed = kDefaultSeed;
  bool significant = false;  // 0 outside [ci_low, ci_high]
};

/// Paired percentile bootstrap of the median difference. Each replicate draws
/// n indices with replacement from one Rng(seed) and applies them to both
/// systems. Errors: InsufficientData (n < 2), DomainError (B = 0, alpha outside (0, 1)).
DeltaResult paired_bootstrap_ci(const PairedSet& p, std::size_t bootstrap = kDefaultBootstrap,
                                double alpha = kDefaultAlpha, std::uint64_t seed = kDefaultSeed);

/// paired_bootstrap_ci restricted to ref_based pairs. Errors: ModeMismatch.
DeltaResult ref_based_delta(const PairedSet& p, std::size_t bootstrap = kDefaultBootstrap,
                            double alpha = kDefaultAlpha, std::uint64_t seed = kDefaultSeed);

/// Paired comparison per (language, dataset), each cell seeded with `seed`.
/// Cells with an empty overlap are skipped.
std::vector<DeltaResult> compare_cells(std::span<const SegmentScore> scores, const std::string& system_a,
                                       const std::string& system_b, ScoreMode mode, std::size_t bootstrap,
                                       double alpha, std::uint64_t seed);

/// Reference-based comparison per language, pooled over datasets.
std::vector<DeltaResult> ref_based_by_language(std::span<const SegmentScore> scores, const std::string& system_a,
                                               const std::string& system_b, std::size_t bootstrap, double alpha,
                                               std::uint64_t seed);

struct RankAnalysis {
  std::optional<Dataset> dataset;
  std::vector<std::string> systems;
  std::vector<std::string> blocks;  // languages
  std::vector<std::size_t> block_sizes;  // overlap size per block
  std::vector<std::vector<double>> block_medians;
  std::vector<std::vector<double>> per_block_ranks;
  std::vector<double> avg_ranks;
  double friedman_chi2 = 0.0;
  double friedman_p = 1.0;
  double alpha = kDefaultAlpha;
  double q_alpha = 0.0;
  double cd = 0.0;
  std::vector<stats::PairVerdict> pairwise;

  [[nodiscard]] std::size_t k() const noexcept { return systems.size(); }
  [[nodiscard]] std::size_t n_blocks() const noexcept { return blocks.size(); }
};

/// Friedman + Nemenyi over a rank matrix whose rows are blocks.
RankAnalysis analyze_ranks(std::vector<std::string> systems, std::vector<std::string> blocks,
                           std::vector<std::vector<double>> per_block_ranks, double alpha = kDefaultAlpha);

/// Blocks are languages; each block ranks the systems' medians over the
/// k-way overlap of that language (and dataset, when given).
RankAnalysis rank_from_scores(std::span<const SegmentScore> scores, std::span<const std::string> systems,
                              ScoreMode mode, std::optional<Dataset> dataset, double alpha = kDefaultAlpha);

nlohmann::ordered_json to_json(const CellSummary& c);
nlohmann::ordered_json to_json(const DeltaResult& d);
nlohmann::ordered_json to_json(const RankAnalysis& r);
CellSummary cell_from_json(const nlohmann::json& j);
DeltaResult delta_from_json(const nlohmann::json& j);
RankAnalysis ranks_from_json(const nlohmann::json& j);

/// CSV with 6-decimal numbers; absent values are empty cells.
std::string cells_csv(std::span<const CellSummary> cells);
std::string deltas_csv(std::span<const DeltaResult> deltas);

}  // namespace transaudit

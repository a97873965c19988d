#pragma once

// Rank statistics used by the score analysis.
//
// Quantiles use linear interpolation between order statistics (type 7):
// h = (n - 1) p, Q(p) = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
//
// Nemenyi critical values q_alpha are the two-tailed constants from Demsar
// (2006), Table 5, i.e. studentized range quantiles divided by sqrt(2).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace transaudit::stats {

/// Type-7 quantile of an unsorted sample; p in [0, 1]. Throws InsufficientData on empty input.
double quantile(std::span<const double> values, double p);
double median(std::span<const double> values);

/// Type-7 quantile of an already sorted sample.
double sorted_quantile(std::span<const double> sorted, double p);

/// Average ranks, ascending (1 = smallest). Ties share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;
};

/// Tie-aware Spearman correlation: Pearson correlation of average ranks. The
/// two-sided p-value uses t = rho sqrt((n-2)/(1-rho^2)) with n-2 degrees of
/// freedom; |rho| = 1 gives p = 0.
/// Errors: LengthMismatch, InsufficientData (n < 3), DegenerateInput (constant input).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Ranks systems by median, 1 = highest; exact ties share the average rank.
std::vector<double> rank_systems(std::span<const double> medians);

struct FriedmanResult {
  double chi2 = 0.0;
  double p = 1.0;
  std::vector<double> avg_ranks;
};

/// Friedman omnibus test over an N x k rank matrix (blocks x systems),
/// chi2 = 12N / (k(k+1)) * (sum_j Rbar_j^2 - k(k+1)^2 / 4), p from chi2 with k-1 df.
/// Errors: DimensionMismatch (N < 2, k < 2 or ragged rows).
FriedmanResult friedman_test(const std::vector<std::vector<double>>& per_block_ranks);

/// q_alpha for k in [2, 10], alpha in {0.05, 0.10}. Errors: UnsupportedK, DomainError.
double nemenyi_q(std::size_t k, double alpha = 0.05);
/// CD = q_alpha sqrt(k(k+1) / (6N)). Errors: UnsupportedK, DomainError (N < 2).
double nemenyi_cd(std::size_t k, std::size_t n_blocks, double alpha = 0.05);

struct PairVerdict {
  std::size_t i = 0;
  std::size_t j = 0;
  double gap = 0.0;
  bool significant = false;  // gap > cd, strictly
};

/// All pairs i < j in index order.
std::vector<PairVerdict> pairwise_significance(std::span<const double> avg_ranks, double cd);

}  // namespace transaudit::stats

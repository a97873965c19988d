#include "transaudit/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "transaudit/error.hpp"

namespace transaudit::stats {

namespace {

// Two-tailed Nemenyi constants, k = 2..10.
constexpr std::array<double, 9> kQ05 = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
constexpr std::array<double, 9> kQ10 = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};

bool same_alpha(double a, double b) { return std::fabs(a - b) < 1e-12; }

}  // namespace

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InsufficientData, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::DomainError, fmt::format("quantile level {} outside [0, 1]", p));
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, p);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, fmt::format("spearman: {} vs {} values", x.size(), y.size()));
  }
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorKind::InsufficientData, fmt::format("spearman needs n >= 3, got {}", n));
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::DegenerateInput, "spearman: constant input");
  SpearmanResult r;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::fabs(r.rho) == 1.0) {
    r.p = 0.0;
    return r;
  }
  const double df = static_cast<double>(n - 2);
  const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
  const boost::math::students_t dist(df);
  r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))), 0.0, 1.0);
  return r;
}

std::vector<double> rank_systems(std::span<const double> medians) {
  std::vector<double> negated(medians.size());
  std::transform(medians.begin(), medians.end(), negated.begin(), [](double m) { return -m; });
  return average_ranks(negated);
}

FriedmanResult friedman_test(const std::vector<std::vector<double>>& per_block_ranks) {
  const std::size_t n = per_block_ranks.size();
  if (n < 2) throw Error(ErrorKind::DimensionMismatch, fmt::format("friedman needs N >= 2 blocks, got {}", n));
  const std::size_t k = per_block_ranks.front().size();
  if (k < 2) throw Error(ErrorKind::DimensionMismatch, fmt::format("friedman needs k >= 2 systems, got {}", k));
  FriedmanResult r;
  r.avg_ranks.assign(k, 0.0);
  for (const auto& row : per_block_ranks) {
    if (row.size() != k) {
      throw Error(ErrorKind::DimensionMismatch, fmt::format("block with {} ranks, expected {}", row.size(), k));
    }
    for (std::size_t j = 0; j < k; ++j) r.avg_ranks[j] += row[j];
  }
  double sum_sq = 0.0;
  for (auto& a : r.avg_ranks) {
    a /= static_cast<double>(n);
    sum_sq += a * a;
  }
  const double kd = static_cast<double>(k);
  r.chi2 = 12.0 * static_cast<double>(n) / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
  if (std::fabs(r.chi2) < 1e-12) r.chi2 = 0.0;
  const boost::math::chi_squared dist(kd - 1.0);
  r.p = r.chi2 <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, r.chi2));
  return r;
}

double nemenyi_q(std::size_t k, double alpha) {
  if (k < 2 || k > 10) throw Error(ErrorKind::UnsupportedK, fmt::format("no Nemenyi constant for k = {}", k));
  if (same_alpha(alpha, 0.05)) return kQ05[k - 2];
  if (same_alpha(alpha, 0.10)) return kQ10[k - 2];
  throw Error(ErrorKind::DomainError, fmt::format("Nemenyi constants exist for alpha 0.05 and 0.10, not {}", alpha));
}

double nemenyi_cd(std::size_t k, std::size_t n_blocks, double alpha) {
  const double q = nemenyi_q(k, alpha);
  if (n_blocks < 2) throw Error(ErrorKind::DomainError, fmt::format("critical difference needs N >= 2, got {}", n_blocks));
  const double kd = static_cast<double>(k);
  return q * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n_blocks)));
}

std::vector<PairVerdict> pairwise_significance(std::span<const double> avg_ranks, double cd) {
  std::vector<PairVerdict> out;
  for (std::size_t i = 0; i < avg_ranks.size(); ++i) {
    for (std::size_t j = i + 1; j < avg_ranks.size(); ++j) {
      const double gap = std::fabs(avg_ranks[i] - avg_ranks[j]);
      out.push_back({i, j, gap, gap > cd});
    }
  }
  return out;
}

}  // namespace transaudit::stats

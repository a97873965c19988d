#pragma once

// Figure renderers. Each returns SVG text plus a companion CSV that carries
// every plotted number at six decimals. Output depends only on the input.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transaudit/judge.hpp"
#include "transaudit/scores.hpp"
#include "transaudit/svg.hpp"

namespace transaudit::report {

struct Rendered {
  std::string svg;
  std::string csv;  // empty when the figure has no companion table
};

struct Style {
  svg::ColorScale sequential = svg::ColorScale::sequential();
  svg::ColorScale diverging = svg::ColorScale::diverging();
};

/// `{"sequential": {"anchors": ...}, "diverging": {"anchors": ...}}`; missing keys keep the defaults.
Style style_from_json(const nlohmann::json& j);

/// Languages sorted by the median of their cell medians, descending; ties by code.
std::vector<std::string> landscape_row_order(std::span<const CellSummary> cells);

/// Three aligned panels (median with an IQR tick, median word count, Spearman rho).
/// When cells hold several systems, `system` picks one (default: the first in sort order).
/// Errors: EmptyInput.
Rendered render_landscape(std::span<const CellSummary> cells, const std::optional<std::string>& system = std::nullopt,
                          const Style& style = {});

/// Diverging heatmap of delta, symmetric bounds [-m, m] with m = max |delta|;
/// each cell shows delta and the win-rate, and a star when significant.
/// Errors: EmptyInput.
Rendered render_delta_heatmap(std::span<const DeltaResult> deltas, const Style& style = {});

/// Average ranks on a 1..k axis, intervals avg +- CD/2, and a bridge for
/// every pair whose gap is <= CD.
Rendered render_cd_diagram(const RankAnalysis& r);

/// Grid of (language, dataset) cells with four bars (A+M, F, O, Clean), each
/// proportional to rate / 1000 on one shared scale. Errors: EmptyInput.
Rendered render_error_overview(const ErrorRates& rates);

/// Horizontal bars sorted by delta descending, CI whiskers, parity line at 0.
Rendered render_ref_delta_bars(std::span<const DeltaResult> deltas);

}  // namespace transaudit::report

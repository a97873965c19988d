#include "transaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "transaudit/error.hpp"
#include "transaudit/stats.hpp"

namespace transaudit::report {

namespace {

using svg::Attrs;
using svg::num;

constexpr double kCellW = 64.0;
constexpr double kCellH = 26.0;
constexpr double kLabelW = 56.0;
constexpr double kHeaderH = 56.0;
constexpr double kPanelGap = 36.0;

std::string fixed3(double v) { return num(v); }

std::string signed3(double v) {
  auto s = fmt::format("{:+.3f}", v);
  if (s == "-0.000" || s == "+0.000") s = "0.000";
  return s;
}

std::string percent(double fraction) { return fmt::format("{}%", std::lround(100.0 * fraction)); }

// Readable text on top of a fill colour.
std::string ink_for(const svg::Rgb& c) {
  const double luminance = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
  return luminance < 128.0 ? "#ffffff" : "#1a1a1a";
}

std::vector<Dataset> dataset_columns(const std::set<Dataset>& present) {
  std::vector<Dataset> out;
  for (const auto d : kAllDatasets) {
    if (present.contains(d)) out.push_back(d);
  }
  return out;
}

std::vector<std::string> sort_by_value_desc(const std::map<std::string, std::vector<double>>& values) {
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& [lang, v] : values) keyed.emplace_back(stats::median(v), lang);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, lang] : keyed) out.push_back(std::move(lang));
  return out;
}

}  // namespace

Style style_from_json(const nlohmann::json& j) {
  Style s;
  if (j.contains("sequential")) s.sequential = svg::ColorScale::from_json(j.at("sequential"));
  if (j.contains("diverging")) s.diverging = svg::ColorScale::from_json(j.at("diverging"));
  return s;
}

std::vector<std::string> landscape_row_order(std::span<const CellSummary> cells) {
  std::map<std::string, std::vector<double>> medians;
  for (const auto& c : cells) medians[c.language].push_back(c.median);
  return sort_by_value_desc(medians);
}

Rendered render_landscape(std::span<const CellSummary> all_cells, const std::optional<std::string>& system,
                          const Style& style) {
  if (all_cells.empty()) throw Error(ErrorKind::EmptyInput, "no cells to draw");
  std::set<std::string> systems;
  for (const auto& c : all_cells) systems.insert(c.system);
  const std::string chosen = system.value_or(*systems.begin());
  if (!systems.contains(chosen)) throw Error(ErrorKind::EmptyInput, "no cells for system '" + chosen + "'");

  std::vector<CellSummary> cells;
  std::set<Dataset> present;
  for (const auto& c : all_cells) {
    if (c.system == chosen) {
      cells.push_back(c);
      present.insert(c.dataset);
    }
  }
  const auto rows = landscape_row_order(cells);
  const auto cols = dataset_columns(present);
  std::map<std::pair<std::string, Dataset>, const CellSummary*> grid;
  for (const auto& c : cells) grid[{c.language, c.dataset}] = &c;

  double max_len = 0.0;
  for (const auto& c : cells) max_len = std::max(max_len, c.median_word_count.value_or(0.0));

  const double panel_w = static_cast<double>(cols.size()) * kCellW;
  const double width = kLabelW + 3.0 * panel_w + 2.0 * kPanelGap + 16.0;
  const double height = kHeaderH + static_cast<double>(rows.size()) * kCellH + 16.0;
  svg::Document doc(width, height);
  doc.text(kLabelW, 18.0, fmt::format("Quality landscape ({})", chosen), {{"font-size", "13"}, {"class", "title"}});

  const std::array<std::string_view, 3> panels = {"median", "length", "rho"};
  const std::array<std::string_view, 3> titles = {"Median score (IQR tick)", "Median length (words)", "Spearman rho"};
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double x0 = kLabelW + static_cast<double>(p) * (panel_w + kPanelGap);
    doc.open_group({{"class", "panel"}, {"data-panel", std::string(panels[p])}});
    doc.text(x0, 36.0, titles[p], {{"class", "panel-title"}});
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
      doc.text(x0 + (static_cast<double>(ci) + 0.5) * kCellW, kHeaderH - 6.0, to_string(cols[ci]),
               {{"text-anchor", "middle"}, {"class", "col-label"}});
    }
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
      const double y = kHeaderH + static_cast<double>(ri) * kCellH;
      if (p == 0) {
        doc.text(kLabelW - 6.0, y + kCellH / 2.0 + 4.0, rows[ri], {{"text-anchor", "end"}, {"class", "row-label"}});
      }
      for (std::size_t ci = 0; ci < cols.size(); ++ci) {
        const double x = x0 + static_cast<double>(ci) * kCellW;
        Attrs attrs{{"class", "cell"}, {"data-language", rows[ri]}, {"data-dataset", std::string(to_string(cols[ci]))}};
        const auto it = grid.find({rows[ri], cols[ci]});
        const CellSummary* c = it == grid.end() ? nullptr : it->second;
        std::optional<double> value;
        std::optional<svg::Rgb> fill;
        std::string label;
        if (c != nullptr) {
          if (p == 0) {
            value = c->median;
            fill = style.sequential.at(c->median);
            label = fixed3(c->median);
          } else if (p == 1 && c->median_word_count) {
            value = *c->median_word_count;
            fill = style.sequential.at(max_len > 0.0 ? *c->median_word_count / max_len : 0.0);
            label = fmt::format("{:.1f}", *c->median_word_count);
          } else if (p == 2 && c->spearman_rho) {
            value = *c->spearman_rho;
            fill = style.diverging.at((*c->spearman_rho + 1.0) / 2.0);
            label = fixed3(*c->spearman_rho);
          }
        }
        if (!fill) {
          attrs.emplace_back("data-state", "missing");
          doc.rect(x, y, kCellW - 2.0, kCellH - 2.0, "#eeeeee", attrs);
          doc.text(x + kCellW / 2.0 - 1.0, y + kCellH / 2.0 + 3.0, "n/a",
                   {{"text-anchor", "middle"}, {"fill", "#888888"}, {"font-size", "9"}});
          continue;
        }
        attrs.emplace_back("data-value", num(*value));
        doc.rect(x, y, kCellW - 2.0, kCellH - 2.0, fill->hex(), attrs);
        doc.text(x + kCellW / 2.0 - 1.0, y + kCellH / 2.0 + 1.0, label,
                 {{"text-anchor", "middle"}, {"fill", ink_for(*fill)}});
        if (p == 0) {
          const double len = std::clamp(c->iqr, 0.0, 1.0) * (kCellW - 2.0);
          const double cx = x + (kCellW - 2.0) / 2.0;
          doc.line(cx - len / 2.0, y + kCellH - 6.0, cx + len / 2.0, y + kCellH - 6.0, ink_for(*fill), 1.5,
                   {{"class", "iqr"}, {"data-iqr", num(c->iqr)}});
        }
      }
    }
    doc.close_group();
  }

  std::vector<CellSummary> ordered;
  for (const auto& lang : rows) {
    for (const auto d : cols) {
      if (const auto it = grid.find({lang, d}); it != grid.end()) ordered.push_back(*it->second);
    }
  }
  return {doc.str(), cells_csv(ordered)};
}

Rendered render_delta_heatmap(std::span<const DeltaResult> deltas, const Style& style) {
  if (deltas.empty()) throw Error(ErrorKind::EmptyInput, "no deltas to draw");
  std::map<std::string, std::vector<double>> by_lang;
  std::set<Dataset> present;
  std::map<std::pair<std::string, Dataset>, const DeltaResult*> grid;
  double m = 0.0;
  for (const auto& d : deltas) {
    const auto ds = d.dataset.value_or(Dataset::arc);
    by_lang[d.language].push_back(d.delta);
    present.insert(ds);
    grid[{d.language, ds}] = &d;
    m = std::max(m, std::fabs(d.delta));
  }
  const double bound = m > 0.0 ? m : 1.0;
  const auto rows = sort_by_value_desc(by_lang);
  const auto cols = dataset_columns(present);

  const double width = kLabelW + static_cast<double>(cols.size()) * kCellW + 140.0;
  const double height = std::max(kHeaderH + static_cast<double>(rows.size()) * kCellH + 16.0, kHeaderH + 140.0);
  svg::Document doc(width, height);
  doc.text(kLabelW, 18.0,
           fmt::format("Median difference {} - {} and win-rate", deltas.front().system_a, deltas.front().system_b),
           {{"font-size", "13"}, {"class", "title"}});
  for (std::size_t ci = 0; ci < cols.size(); ++ci) {
    doc.text(kLabelW + (static_cast<double>(ci) + 0.5) * kCellW, kHeaderH - 6.0, to_string(cols[ci]),
             {{"text-anchor", "middle"}, {"class", "col-label"}});
  }
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const double y = kHeaderH + static_cast<double>(ri) * kCellH;
    doc.text(kLabelW - 6.0, y + kCellH / 2.0 + 4.0, rows[ri], {{"text-anchor", "end"}, {"class", "row-label"}});
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
      const double x = kLabelW + static_cast<double>(ci) * kCellW;
      Attrs attrs{{"class", "cell"}, {"data-language", rows[ri]}, {"data-dataset", std::string(to_string(cols[ci]))}};
      const auto it = grid.find({rows[ri], cols[ci]});
      if (it == grid.end()) {
        attrs.emplace_back("data-state", "missing");
        doc.rect(x, y, kCellW - 2.0, kCellH - 2.0, "#eeeeee", attrs);
        continue;
      }
      const auto& d = *it->second;
      const auto fill = style.diverging.at(0.5 + 0.5 * d.delta / bound);
      attrs.emplace_back("data-delta", num(d.delta));
      doc.rect(x, y, kCellW - 2.0, kCellH - 2.0, fill.hex(), attrs);
      const auto ink = ink_for(fill);
      doc.text(x + kCellW / 2.0 - 1.0, y + 11.0, signed3(d.delta), {{"text-anchor", "middle"}, {"fill", ink}});
      doc.text(x + kCellW / 2.0 - 1.0, y + 21.0, percent(d.win_rate),
               {{"text-anchor", "middle"}, {"fill", ink}, {"font-size", "9"}});
      if (d.significant) {
        doc.text(x + kCellW - 8.0, y + 10.0, "*", {{"class", "star"}, {"fill", ink}, {"font-size", "12"}});
      }
    }
  }
  // Legend: symmetric colour bar.
  const double lx = kLabelW + static_cast<double>(cols.size()) * kCellW + 40.0;
  const double ly = kHeaderH;
  constexpr int kSteps = 20;
  for (int i = 0; i < kSteps; ++i) {
    const double t = 1.0 - (static_cast<double>(i) + 0.5) / kSteps;
    doc.rect(lx, ly + i * 5.0, 14.0, 5.0, style.diverging.at(t).hex(), {{"class", "legend"}});
  }
  doc.text(lx + 18.0, ly + 6.0, signed3(bound), {{"class", "legend-max"}});
  doc.text(lx + 18.0, ly + 53.0, "0.000", {{"class", "legend-mid"}});
  doc.text(lx + 18.0, ly + 100.0, signed3(-bound), {{"class", "legend-min"}});
  doc.text(lx, ly + 120.0, "* 95% CI excludes 0", {{"font-size", "9"}});

  std::vector<DeltaResult> ordered;
  for (const auto& lang : rows) {
    for (const auto d : cols) {
      if (const auto it = grid.find({lang, d}); it != grid.end()) ordered.push_back(*it->second);
    }
  }
  return {doc.str(), deltas_csv(ordered)};
}

Rendered render_cd_diagram(const RankAnalysis& r) {
  const std::size_t k = std::max<std::size_t>(r.k(), 2);
  constexpr double kX0 = 110.0;
  constexpr double kX1 = 530.0;
  auto x_of = [&](double rank) { return kX0 + (rank - 1.0) / static_cast<double>(k - 1) * (kX1 - kX0); };

  std::vector<std::size_t> order(r.k());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.avg_ranks[a] != r.avg_ranks[b] ? r.avg_ranks[a] < r.avg_ranks[b] : r.systems[a] < r.systems[b];
  });

  std::vector<stats::PairVerdict> bridges;
  for (const auto& v : r.pairwise) {
    if (!v.significant) bridges.push_back(v);
  }
  constexpr double kAxisY = 70.0;
  const double bridges_y = kAxisY + 22.0;
  const double rows_y = bridges_y + static_cast<double>(bridges.size()) * 8.0 + 18.0;
  const double height = rows_y + static_cast<double>(r.k()) * 26.0 + 20.0;
  svg::Document doc(640.0, height);
  doc.text(kX0, 18.0,
           fmt::format("Average ranks (N = {}, CD = {}, alpha = {})", r.n_blocks(), fixed3(r.cd), fixed3(r.alpha)),
           {{"font-size", "13"}, {"class", "title"}});

  // CD scale bar.
  doc.line(kX0, 36.0, kX0 + (x_of(1.0 + r.cd) - x_of(1.0)), 36.0, "#333333", 2.0, {{"class", "cd-bar"}});
  doc.text(kX0 + (x_of(1.0 + r.cd) - x_of(1.0)) + 6.0, 40.0, "CD " + fixed3(r.cd), {{"font-size", "10"}});

  doc.line(kX0, kAxisY, kX1, kAxisY, "#333333", 1.0, {{"class", "axis"}});
  for (std::size_t t = 1; t <= k; ++t) {
    const double x = x_of(static_cast<double>(t));
    doc.line(x, kAxisY - 5.0, x, kAxisY, "#333333", 1.0);
    doc.text(x, kAxisY - 8.0, std::to_string(t), {{"text-anchor", "middle"}});
  }
  doc.text(kX1 + 8.0, kAxisY + 4.0, "rank (lower is better)", {{"font-size", "9"}});

  for (std::size_t b = 0; b < bridges.size(); ++b) {
    const auto& v = bridges[b];
    const double y = bridges_y + static_cast<double>(b) * 8.0;
    const double xa = x_of(r.avg_ranks[v.i]);
    const double xb = x_of(r.avg_ranks[v.j]);
    doc.line(std::min(xa, xb), y, std::max(xa, xb), y, "#9e9e9e", 4.0,
             {{"class", "bridge"}, {"data-a", r.systems[v.i]}, {"data-b", r.systems[v.j]}, {"data-gap", num(v.gap)},
              {"stroke-linecap", "round"}});
  }

  std::ostringstream csv;
  csv << "system,avg_rank,interval_low,interval_high,cd\n";
  for (std::size_t row = 0; row < order.size(); ++row) {
    const auto i = order[row];
    const double y = rows_y + static_cast<double>(row) * 26.0;
    const double avg = r.avg_ranks[i];
    const double lo = avg - r.cd / 2.0;
    const double hi = avg + r.cd / 2.0;
    doc.line(x_of(lo), y, x_of(hi), y, "#4a4a4a", 1.0, {{"class", "interval"}, {"data-system", r.systems[i]}});
    doc.line(x_of(avg), y, x_of(avg), kAxisY, "#cccccc", 0.5, {{"stroke-dasharray", "2,2"}});
    doc.circle(x_of(avg), y, 4.0, "#08306b",
               {{"class", "system"}, {"data-system", r.systems[i]}, {"data-rank", num(avg)}});
    doc.text(12.0, y + 4.0, fmt::format("{} ({})", r.systems[i], fmt::format("{:.2f}", avg)), {{"class", "label"}});
    csv << r.systems[i] << ',' << fmt::format("{:.6f}", avg) << ',' << fmt::format("{:.6f}", lo) << ','
        << fmt::format("{:.6f}", hi) << ',' << fmt::format("{:.6f}", r.cd) << '\n';
  }
  return {doc.str(), csv.str()};
}

Rendered render_error_overview(const ErrorRates& rates) {
  if (rates.cells.empty()) throw Error(ErrorKind::EmptyInput, "no error rates to draw");
  std::set<std::string> langs;
  std::set<Dataset> present;
  std::map<std::pair<std::string, Dataset>, const RateCell*> grid;
  for (const auto& c : rates.cells) {
    langs.insert(c.language);
    present.insert(c.dataset);
    grid[{c.language, c.dataset}] = &c;
  }
  const auto cols = dataset_columns(present);
  const std::vector<std::string> rows(langs.begin(), langs.end());

  constexpr double kW = 170.0;
  constexpr double kH = 74.0;
  constexpr double kBarX = 40.0;
  constexpr double kBarMax = 100.0;  // 1000 per 1k
  constexpr double kBarH = 12.0;
  const double width = kLabelW + static_cast<double>(cols.size()) * kW + 16.0;
  const double height = kHeaderH + static_cast<double>(rows.size()) * kH + 16.0;
  svg::Document doc(width, height);
  doc.text(kLabelW, 18.0, "Agreed errors per 1,000 items", {{"font-size", "13"}, {"class", "title"}});
  for (std::size_t ci = 0; ci < cols.size(); ++ci) {
    doc.text(kLabelW + (static_cast<double>(ci) + 0.5) * kW, kHeaderH - 8.0, to_string(cols[ci]),
             {{"text-anchor", "middle"}, {"class", "col-label"}});
  }
  const std::array<std::string_view, 4> names = {"A+M", "F", "O", "Clean"};
  const std::array<std::string_view, 4> colors = {"#b2182b", "#ef8a62", "#999999", "#4d9221"};
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const double y0 = kHeaderH + static_cast<double>(ri) * kH;
    doc.text(kLabelW - 6.0, y0 + kH / 2.0, rows[ri], {{"text-anchor", "end"}, {"class", "row-label"}});
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
      const double x0 = kLabelW + static_cast<double>(ci) * kW;
      const auto it = grid.find({rows[ri], cols[ci]});
      const RateCell* c = it == grid.end() ? nullptr : it->second;
      doc.open_group({{"class", "cell"}, {"data-language", rows[ri]}, {"data-dataset", std::string(to_string(cols[ci]))}});
      doc.rect(x0 + 2.0, y0 + 2.0, kW - 4.0, kH - 4.0, "#fafafa", {{"stroke", "#dddddd"}});
      if (c == nullptr || !c->rate) {
        doc.text(x0 + kW / 2.0, y0 + kH / 2.0, "n/a", {{"text-anchor", "middle"}, {"fill", "#888888"}});
        doc.close_group();
        continue;
      }
      const std::array<double, 4> values = {(*c->rate)[0], (*c->rate)[1], (*c->rate)[2], *c->clean_rate};
      for (std::size_t b = 0; b < 4; ++b) {
        const double y = y0 + 8.0 + static_cast<double>(b) * (kBarH + 4.0);
        const double w = std::clamp(values[b], 0.0, 1000.0) / 1000.0 * kBarMax;
        doc.text(x0 + 6.0, y + kBarH - 2.0, names[b], {{"font-size", "9"}});
        doc.rect(x0 + kBarX, y, w, kBarH, colors[b],
                 {{"class", "bar"}, {"data-bucket", std::string(names[b])}, {"data-rate", num(values[b])}});
        doc.text(x0 + kBarX + w + 4.0, y + kBarH - 2.0, std::to_string(std::lround(values[b])), {{"font-size", "9"}});
      }
      doc.close_group();
    }
  }
  return {doc.str(), rates_csv(rates)};
}

Rendered render_ref_delta_bars(std::span<const DeltaResult> input) {
  std::vector<DeltaResult> deltas(input.begin(), input.end());
  std::stable_sort(deltas.begin(), deltas.end(), [](const auto& a, const auto& b) {
    return a.delta != b.delta ? a.delta > b.delta : a.language < b.language;
  });
  double m = 0.0;
  for (const auto& d : deltas) m = std::max({m, std::fabs(d.delta), std::fabs(d.ci_low), std::fabs(d.ci_high)});
  const double bound = m > 0.0 ? 1.1 * m : 0.01;

  constexpr double kX0 = 80.0;
  constexpr double kX1 = 520.0;
  constexpr double kRowH = 24.0;
  constexpr double kTop = 50.0;
  auto x_of = [&](double v) { return kX0 + (v + bound) / (2.0 * bound) * (kX1 - kX0); };
  const double height = kTop + static_cast<double>(std::max<std::size_t>(deltas.size(), 1)) * kRowH + 40.0;
  svg::Document doc(620.0, height);
  const std::string title =
      deltas.empty() ? std::string("Reference-based median difference (no data)")
                     : fmt::format("Reference-based median difference {} - {}", deltas.front().system_a,
                                   deltas.front().system_b);
  doc.text(kX0, 18.0, title, {{"font-size", "13"}, {"class", "title"}});

  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const auto& d = deltas[i];
    const double y = kTop + static_cast<double>(i) * kRowH;
    const double xa = x_of(std::min(0.0, d.delta));
    const double xb = x_of(std::max(0.0, d.delta));
    doc.text(kX0 - 8.0, y + 12.0, d.language, {{"text-anchor", "end"}, {"class", "row-label"}});
    doc.rect(xa, y + 4.0, xb - xa, 12.0, d.delta >= 0.0 ? "#b2182b" : "#2166ac",
             {{"class", "bar"}, {"data-language", d.language}, {"data-delta", num(d.delta)}});
    const double wl = x_of(d.ci_low);
    const double wh = x_of(d.ci_high);
    doc.line(wl, y + 10.0, wh, y + 10.0, "#1a1a1a", 1.0,
             {{"class", "whisker"}, {"data-low", num(d.ci_low)}, {"data-high", num(d.ci_high)}});
    doc.line(wl, y + 6.0, wl, y + 14.0, "#1a1a1a", 1.0);
    doc.line(wh, y + 6.0, wh, y + 14.0, "#1a1a1a", 1.0);
    doc.text(kX1 + 8.0, y + 12.0, signed3(d.delta) + (d.significant ? " *" : ""), {{"font-size", "10"}});
  }
  const double bottom = kTop + static_cast<double>(std::max<std::size_t>(deltas.size(), 1)) * kRowH;
  doc.line(x_of(0.0), kTop - 6.0, x_of(0.0), bottom, "#333333", 1.0, {{"class", "parity"}});
  for (const double v : {-bound, 0.0, bound}) {
    doc.text(x_of(v), bottom + 16.0, signed3(v), {{"text-anchor", "middle"}, {"font-size", "9"}});
  }
  return {doc.str(), deltas_csv(deltas)};
}

}  // namespace transaudit::report

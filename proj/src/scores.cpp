#include "transaudit/scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "transaudit/error.hpp"
#include "transaudit/random.hpp"
#include "transaudit/text.hpp"

namespace transaudit {

namespace {

std::string num6(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  return fmt::format("{:.6f}", v);
}

std::string opt6(const std::optional<double>& v) { return v ? num6(*v) : std::string(); }

// Type-7 median, reordering `v` in place.
double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + 0.5 * (upper - lower);
}

std::vector<double> column_a(const PairedSet& p) {
  std::vector<double> out;
  out.reserve(p.n());
  for (const auto& x : p.pairs) out.push_back(x.a);
  return out;
}

std::vector<double> column_b(const PairedSet& p) {
  std::vector<double> out;
  out.reserve(p.n());
  for (const auto& x : p.pairs) out.push_back(x.b);
  return out;
}

template <class T>
std::optional<T> opt_from(const nlohmann::json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

Dataset dataset_from(const nlohmann::json& j) {
  const auto d = parse_dataset(j.get<std::string>());
  if (!d) throw Error(ErrorKind::SchemaViolation, "unknown dataset " + j.dump());
  return *d;
}

ScoreMode mode_from(const nlohmann::json& j) {
  const auto m = parse_score_mode(j.get<std::string>());
  if (!m) throw Error(ErrorKind::SchemaViolation, "unknown score mode " + j.dump());
  return *m;
}

}  // namespace

std::string_view to_string(ScoreMode m) noexcept { return m == ScoreMode::ref_free ? "ref_free" : "ref_based"; }

std::optional<ScoreMode> parse_score_mode(std::string_view s) {
  if (s == "ref_free" || s == "ref-free" || s == "qe") return ScoreMode::ref_free;
  if (s == "ref_based" || s == "ref-based" || s == "ref") return ScoreMode::ref_based;
  return std::nullopt;
}

std::size_t word_count(std::string_view text) { return text::count_words(text); }

std::vector<SegmentScore> load_scores(std::istream& in) {
  std::vector<SegmentScore> out;
  std::set<std::tuple<ItemKey, std::string, ScoreMode>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LineError(ErrorKind::MalformedLine, line_no, e.what());
    }
    if (!j.is_object()) throw LineError(ErrorKind::MalformedLine, line_no, "score record is not an object");
    SegmentScore s;
    try {
      s.key = key_from_json(j);
    } catch (const Error& e) {
      throw LineError(e.kind(), line_no, e.what());
    }
    const auto system = j.find("system");
    if (system == j.end() || !system->is_string()) throw LineError(ErrorKind::MissingKeyField, line_no, "system");
    s.system = system->get<std::string>();
    const auto mode = j.find("mode");
    if (mode == j.end() || !mode->is_string()) throw LineError(ErrorKind::MissingKeyField, line_no, "mode");
    const auto parsed_mode = parse_score_mode(mode->get<std::string>());
    if (!parsed_mode) throw LineError(ErrorKind::MalformedLine, line_no, "unknown mode " + mode->dump());
    s.mode = *parsed_mode;
    const auto score = j.find("score");
    if (score == j.end() || !score->is_number()) throw LineError(ErrorKind::MissingKeyField, line_no, "score");
    s.score = score->get<double>();
    if (!(s.score >= 0.0 && s.score <= 1.0)) {
      throw LineError(ErrorKind::ScoreOutOfRange, line_no, fmt::format("score {} outside [0, 1]", score->dump()));
    }
    if (const auto t = j.find("target_text"); t != j.end() && t->is_string()) s.target_text = t->get<std::string>();
    if (const auto w = j.find("word_count"); w != j.end() && !w->is_null()) {
      if (!w->is_number_unsigned()) throw LineError(ErrorKind::MalformedLine, line_no, "word_count must be >= 0");
      s.word_count = w->get<std::size_t>();
    } else if (s.target_text) {
      s.word_count = word_count(*s.target_text);
    }
    if (!seen.insert({s.key, s.system, s.mode}).second) {
      throw LineError(ErrorKind::DuplicateScore, line_no,
                      fmt::format("{} already scored for {} ({})", s.key.to_string(), s.system, to_string(s.mode)));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SegmentScore> load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  return load_scores(in);
}

CellSummary cell_summary(std::span<const SegmentScore> scores) {
  if (scores.empty()) throw Error(ErrorKind::InsufficientData, "empty cell");
  CellSummary c;
  c.system = scores.front().system;
  c.language = scores.front().key.language;
  c.dataset = scores.front().key.dataset;
  c.n = scores.size();
  std::vector<double> values;
  std::vector<double> lengths;
  std::vector<double> scored_lengths;
  for (const auto& s : scores) {
    values.push_back(s.score);
    if (s.word_count) {
      lengths.push_back(static_cast<double>(*s.word_count));
      scored_lengths.push_back(s.score);
    }
  }
  std::sort(values.begin(), values.end());
  c.median = stats::sorted_quantile(values, 0.5);
  c.q1 = stats::sorted_quantile(values, 0.25);
  c.q3 = stats::sorted_quantile(values, 0.75);
  c.iqr = c.q3 - c.q1;
  if (!lengths.empty()) c.median_word_count = stats::median(lengths);
  if (lengths.size() >= 3) {
    try {
      const auto r = stats::spearman(lengths, scored_lengths);
      c.spearman_rho = r.rho;
      c.spearman_p = r.p;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInput) throw;
    }
  }
  return c;
}

std::vector<CellSummary> landscape(std::span<const SegmentScore> scores, ScoreMode mode) {
  std::map<std::tuple<std::string, std::string, Dataset>, std::vector<SegmentScore>> cells;
  for (const auto& s : scores) {
    if (s.mode == mode) cells[{s.system, s.key.language, s.key.dataset}].push_back(s);
  }
  std::vector<CellSummary> out;
  for (const auto& [_, group] : cells) out.push_back(cell_summary(group));
  return out;
}

PairedSet paired_overlap(std::span<const SegmentScore> scores, const std::string& system_a,
                         const std::string& system_b, ScoreMode mode) {
  std::map<ItemKey, double> a;
  std::map<ItemKey, double> b;
  for (const auto& s : scores) {
    if (s.mode != mode) continue;
    if (s.system == system_a) a[s.key] = s.score;
    if (s.system == system_b) b[s.key] = s.score;
  }
  PairedSet p{system_a, system_b, mode, {}};
  for (const auto& [key, score] : a) {
    if (const auto it = b.find(key); it != b.end()) p.pairs.push_back({key, score, it->second});
  }
  if (p.pairs.empty()) spdlog::warn("empty overlap between {} and {} ({})", system_a, system_b, to_string(mode));
  return p;
}

PairedSet paired_overlap(std::span<const SegmentScore> scores, const std::string& system_a,
                         const std::string& system_b) {
  std::set<ScoreMode> modes;
  for (const auto& s : scores) {
    if (s.system == system_a || s.system == system_b) modes.insert(s.mode);
  }
  if (modes.size() > 1) {
    throw Error(ErrorKind::ModeMismatch,
                fmt::format("{} and {} mix ref_free and ref_based records", system_a, system_b));
  }
  return paired_overlap(scores, system_a, system_b, modes.empty() ? ScoreMode::ref_free : *modes.begin());
}

AlignedSet aligned_overlap(std::span<const SegmentScore> scores, std::span<const std::string> systems,
                           ScoreMode mode) {
  if (systems.size() < 2) throw Error(ErrorKind::DomainError, "an overlap needs at least two systems");
  std::vector<std::map<ItemKey, double>> by_system(systems.size());
  for (const auto& s : scores) {
    if (s.mode != mode) continue;
    for (std::size_t j = 0; j < systems.size(); ++j) {
      if (s.system == systems[j]) by_system[j][s.key] = s.score;
    }
  }
  AlignedSet out;
  out.systems.assign(systems.begin(), systems.end());
  out.mode = mode;
  out.scores.resize(systems.size());
  for (const auto& [key, score] : by_system.front()) {
    bool everywhere = true;
    for (std::size_t j = 1; j < systems.size() && everywhere; ++j) everywhere = by_system[j].contains(key);
    if (!everywhere) continue;
    out.keys.push_back(key);
    for (std::size_t j = 0; j < systems.size(); ++j) out.scores[j].push_back(by_system[j].at(key));
  }
  if (out.keys.empty()) spdlog::warn("empty {}-way overlap ({})", systems.size(), to_string(mode));
  return out;
}

DeltaWin median_delta_and_winrate(const PairedSet& p) {
  if (p.n() == 0) throw Error(ErrorKind::InsufficientData, "no paired items");
  DeltaWin r;
  const auto a = column_a(p);
  const auto b = column_b(p);
  r.delta = stats::median(a) - stats::median(b);
  for (const auto& x : p.pairs) {
    if (x.a > x.b) {
      ++r.wins;
    } else if (x.a < x.b) {
      ++r.losses;
    } else {
      ++r.ties;
    }
  }
  r.win_rate = static_cast<double>(r.wins) / static_cast<double>(p.n());
  return r;
}

DeltaResult paired_bootstrap_ci(const PairedSet& p, std::size_t bootstrap, double alpha, std::uint64_t seed) {
  if (p.n() < 2) throw Error(ErrorKind::InsufficientData, fmt::format("bootstrap needs n >= 2, got {}", p.n()));
  if (bootstrap == 0) throw Error(ErrorKind::DomainError, "bootstrap needs B >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::DomainError, fmt::format("alpha {} outside (0, 1)", alpha));

  DeltaResult r;
  r.system_a = p.system_a;
  r.system_b = p.system_b;
  r.mode = p.mode;
  r.n = p.n();
  r.alpha = alpha;
  r.bootstrap = bootstrap;
  r.seed = seed;
  const auto dw = median_delta_and_winrate(p);
  r.delta = dw.delta;
  r.win_rate = dw.win_rate;
  const auto a = column_a(p);
  const auto b = column_b(p);
  r.median_a = stats::median(a);
  r.median_b = stats::median(b);

  Rng rng(seed);
  const std::size_t n = p.n();
  std::vector<double> ra(n);
  std::vector<double> rb(n);
  std::vector<double> deltas(bootstrap);
  for (std::size_t rep = 0; rep < bootstrap; ++rep) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = rng.index(n);
      ra[i] = a[idx];
      rb[i] = b[idx];
    }
    deltas[rep] = median_inplace(ra) - median_inplace(rb);
  }
  std::sort(deltas.begin(), deltas.end());
  r.ci_low = stats::sorted_quantile(deltas, alpha / 2.0);
  r.ci_high = stats::sorted_quantile(deltas, 1.0 - alpha / 2.0);
  r.significant = r.ci_low > 0.0 || r.ci_high < 0.0;
  return r;
}

DeltaResult ref_based_delta(const PairedSet& p, std::size_t bootstrap, double alpha, std::uint64_t seed) {
  if (p.mode != ScoreMode::ref_based) {
    throw Error(ErrorKind::ModeMismatch, "reference-based delta needs ref_based scores");
  }
  return paired_bootstrap_ci(p, bootstrap, alpha, seed);
}

std::vector<DeltaResult> compare_cells(std::span<const SegmentScore> scores, const std::string& system_a,
                                       const std::string& system_b, ScoreMode mode, std::size_t bootstrap,
                                       double alpha, std::uint64_t seed) {
  const auto all = paired_overlap(scores, system_a, system_b, mode);
  std::map<std::pair<std::string, Dataset>, PairedSet> cells;
  for (const auto& x : all.pairs) {
    auto& cell = cells[{x.key.language, x.key.dataset}];
    cell.system_a = system_a;
    cell.system_b = system_b;
    cell.mode = mode;
    cell.pairs.push_back(x);
  }
  std::vector<DeltaResult> out;
  for (const auto& [where, cell] : cells) {
    if (cell.n() < 2) {
      spdlog::warn("skipping {}/{}: only {} paired item", where.first, to_string(where.second), cell.n());
      continue;
    }
    auto r = paired_bootstrap_ci(cell, bootstrap, alpha, seed);
    r.language = where.first;
    r.dataset = where.second;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DeltaResult> ref_based_by_language(std::span<const SegmentScore> scores, const std::string& system_a,
                                               const std::string& system_b, std::size_t bootstrap, double alpha,
                                               std::uint64_t seed) {
  const auto all = paired_overlap(scores, system_a, system_b, ScoreMode::ref_based);
  std::map<std::string, PairedSet> by_lang;
  for (const auto& x : all.pairs) {
    auto& cell = by_lang[x.key.language];
    cell.system_a = system_a;
    cell.system_b = system_b;
    cell.mode = ScoreMode::ref_based;
    cell.pairs.push_back(x);
  }
  std::vector<DeltaResult> out;
  for (const auto& [lang, cell] : by_lang) {
    if (cell.n() < 2) {
      spdlog::warn("skipping {}: only {} paired item", lang, cell.n());
      continue;
    }
    auto r = ref_based_delta(cell, bootstrap, alpha, seed);
    r.language = lang;
    out.push_back(std::move(r));
  }
  return out;
}

RankAnalysis analyze_ranks(std::vector<std::string> systems, std::vector<std::string> blocks,
                           std::vector<std::vector<double>> per_block_ranks, double alpha) {
  if (blocks.size() != per_block_ranks.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} block labels for {} rank rows", blocks.size(), per_block_ranks.size()));
  }
  RankAnalysis r;
  r.systems = std::move(systems);
  r.blocks = std::move(blocks);
  r.per_block_ranks = std::move(per_block_ranks);
  const auto f = stats::friedman_test(r.per_block_ranks);
  if (f.avg_ranks.size() != r.systems.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("{} systems for rank rows of width {}", r.systems.size(), f.avg_ranks.size()));
  }
  r.avg_ranks = f.avg_ranks;
  r.friedman_chi2 = f.chi2;
  r.friedman_p = f.p;
  r.alpha = alpha;
  r.q_alpha = stats::nemenyi_q(r.k(), alpha);
  r.cd = stats::nemenyi_cd(r.k(), r.n_blocks(), alpha);
  r.pairwise = stats::pairwise_significance(r.avg_ranks, r.cd);
  return r;
}

RankAnalysis rank_from_scores(std::span<const SegmentScore> scores, std::span<const std::string> systems,
                              ScoreMode mode, std::optional<Dataset> dataset, double alpha) {
  std::map<std::string, std::vector<SegmentScore>> by_lang;
  for (const auto& s : scores) {
    if (dataset && s.key.dataset != *dataset) continue;
    by_lang[s.key.language].push_back(s);
  }
  std::vector<std::string> blocks;
  std::vector<std::size_t> sizes;
  std::vector<std::vector<double>> medians;
  std::vector<std::vector<double>> ranks;
  for (const auto& [lang, group] : by_lang) {
    const auto aligned = aligned_overlap(group, systems, mode);
    if (aligned.keys.empty()) continue;
    std::vector<double> m;
    for (const auto& col : aligned.scores) m.push_back(stats::median(col));
    blocks.push_back(lang);
    sizes.push_back(aligned.keys.size());
    ranks.push_back(stats::rank_systems(m));
    medians.push_back(std::move(m));
  }
  if (blocks.empty()) throw Error(ErrorKind::EmptyOverlap, "no language has items scored by every system");
  auto r = analyze_ranks({systems.begin(), systems.end()}, std::move(blocks), std::move(ranks), alpha);
  r.dataset = dataset;
  r.block_sizes = std::move(sizes);
  r.block_medians = std::move(medians);
  return r;
}

nlohmann::ordered_json to_json(const CellSummary& c) {
  nlohmann::ordered_json j;
  j["system"] = c.system;
  j["language"] = c.language;
  j["dataset"] = to_string(c.dataset);
  j["n"] = c.n;
  j["median"] = c.median;
  j["q1"] = c.q1;
  j["q3"] = c.q3;
  j["iqr"] = c.iqr;
  j["median_word_count"] = c.median_word_count ? nlohmann::ordered_json(*c.median_word_count) : nlohmann::ordered_json(nullptr);
  j["spearman_rho"] = c.spearman_rho ? nlohmann::ordered_json(*c.spearman_rho) : nlohmann::ordered_json(nullptr);
  j["spearman_p"] = c.spearman_p ? nlohmann::ordered_json(*c.spearman_p) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json to_json(const DeltaResult& d) {
  nlohmann::ordered_json j;
  j["system_a"] = d.system_a;
  j["system_b"] = d.system_b;
  j["mode"] = to_string(d.mode);
  j["language"] = d.language.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(d.language);
  j["dataset"] = d.dataset ? nlohmann::ordered_json(to_string(*d.dataset)) : nlohmann::ordered_json(nullptr);
  j["n"] = d.n;
  j["median_a"] = d.median_a;
  j["median_b"] = d.median_b;
  j["delta"] = d.delta;
  j["win_rate"] = d.win_rate;
  j["ci_low"] = d.ci_low;
  j["ci_high"] = d.ci_high;
  j["significant"] = d.significant;
  j["alpha"] = d.alpha;
  j["B"] = d.bootstrap;
  j["seed"] = d.seed;
  return j;
}

nlohmann::ordered_json to_json(const RankAnalysis& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset ? nlohmann::ordered_json(to_string(*r.dataset)) : nlohmann::ordered_json(nullptr);
  j["systems"] = r.systems;
  j["blocks"] = r.blocks;
  j["k"] = r.k();
  j["N"] = r.n_blocks();
  if (!r.block_sizes.empty()) j["block_sizes"] = r.block_sizes;
  if (!r.block_medians.empty()) j["block_medians"] = r.block_medians;
  j["per_block_ranks"] = r.per_block_ranks;
  j["avg_ranks"] = r.avg_ranks;
  j["friedman_chi2"] = r.friedman_chi2;
  j["friedman_p"] = r.friedman_p;
  j["alpha"] = r.alpha;
  j["q_alpha"] = r.q_alpha;
  j["cd"] = r.cd;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& v : r.pairwise) {
    nlohmann::ordered_json p;
    p["a"] = r.systems[v.i];
    p["b"] = r.systems[v.j];
    p["gap"] = v.gap;
    p["significant"] = v.significant;
    pairs.push_back(std::move(p));
  }
  j["pairwise"] = std::move(pairs);
  return j;
}

CellSummary cell_from_json(const nlohmann::json& j) {
  CellSummary c;
  c.system = j.value("system", "");
  c.language = j.at("language").get<std::string>();
  c.dataset = dataset_from(j.at("dataset"));
  c.n = j.at("n").get<std::size_t>();
  c.median = j.at("median").get<double>();
  c.q1 = j.at("q1").get<double>();
  c.q3 = j.at("q3").get<double>();
  c.iqr = j.at("iqr").get<double>();
  c.median_word_count = opt_from<double>(j, "median_word_count");
  c.spearman_rho = opt_from<double>(j, "spearman_rho");
  c.spearman_p = opt_from<double>(j, "spearman_p");
  return c;
}

DeltaResult delta_from_json(const nlohmann::json& j) {
  DeltaResult d;
  d.system_a = j.value("system_a", "");
  d.system_b = j.value("system_b", "");
  if (const auto m = j.find("mode"); m != j.end()) d.mode = mode_from(*m);
  d.language = opt_from<std::string>(j, "language").value_or("");
  if (const auto ds = opt_from<std::string>(j, "dataset")) d.dataset = dataset_from(*ds);
  d.n = j.at("n").get<std::size_t>();
  d.median_a = j.value("median_a", 0.0);
  d.median_b = j.value("median_b", 0.0);
  d.delta = j.at("delta").get<double>();
  d.win_rate = j.at("win_rate").get<double>();
  d.ci_low = j.at("ci_low").get<double>();
  d.ci_high = j.at("ci_high").get<double>();
  d.significant = j.at("significant").get<bool>();
  d.alpha = j.value("alpha", kDefaultAlpha);
  d.bootstrap = j.value("B", kDefaultBootstrap);
  d.seed = j.value("seed", kDefaultSeed);
  return d;
}

RankAnalysis ranks_from_json(const nlohmann::json& j) {
  RankAnalysis r;
  if (const auto ds = opt_from<std::string>(j, "dataset")) r.dataset = dataset_from(*ds);
  r.systems = j.at("systems").get<std::vector<std::string>>();
  r.blocks = j.at("blocks").get<std::vector<std::string>>();
  r.block_sizes = j.value("block_sizes", std::vector<std::size_t>{});
  r.block_medians = j.value("block_medians", std::vector<std::vector<double>>{});
  r.per_block_ranks = j.at("per_block_ranks").get<std::vector<std::vector<double>>>();
  r.avg_ranks = j.at("avg_ranks").get<std::vector<double>>();
  r.friedman_chi2 = j.at("friedman_chi2").get<double>();
  r.friedman_p = j.at("friedman_p").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.q_alpha = j.at("q_alpha").get<double>();
  r.cd = j.at("cd").get<double>();
  if (r.avg_ranks.size() != r.systems.size()) {
    throw Error(ErrorKind::DimensionMismatch, "avg_ranks and systems differ in length");
  }
  r.pairwise = stats::pairwise_significance(r.avg_ranks, r.cd);
  return r;
}

std::string cells_csv(std::span<const CellSummary> cells) {
  std::ostringstream out;
  out << "system,language,dataset,n,median,q1,q3,iqr,median_word_count,spearman_rho,spearman_p\n";
  for (const auto& c : cells) {
    out << c.system << ',' << c.language << ',' << to_string(c.dataset) << ',' << c.n << ',' << num6(c.median)
        << ',' << num6(c.q1) << ',' << num6(c.q3) << ',' << num6(c.iqr) << ',' << opt6(c.median_word_count) << ','
        << opt6(c.spearman_rho) << ',' << opt6(c.spearman_p) << '\n';
  }
  return out.str();
}

std::string deltas_csv(std::span<const DeltaResult> deltas) {
  std::ostringstream out;
  out << "system_a,system_b,mode,language,dataset,n,median_a,median_b,delta,win_rate,ci_low,ci_high,significant,"
         "alpha,B,seed\n";
  for (const auto& d : deltas) {
    out << d.system_a << ',' << d.system_b << ',' << to_string(d.mode) << ',' << d.language << ','
        << (d.dataset ? std::string(to_string(*d.dataset)) : std::string()) << ',' << d.n << ','
        << num6(d.median_a) << ',' << num6(d.median_b) << ',' << num6(d.delta) << ',' << num6(d.win_rate) << ','
        << num6(d.ci_low) << ',' << num6(d.ci_high) << ',' << (d.significant ? 1 : 0) << ',' << num6(d.alpha)
        << ',' << d.bootstrap << ',' << d.seed << '\n';
  }
  return out.str();
}

}  // namespace transaudit

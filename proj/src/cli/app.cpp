#include "cli/app.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cli/config.hpp"
#include "cli/digest.hpp"
#include "transaudit/audit.hpp"
#include "transaudit/corpus.hpp"
#include "transaudit/engine.hpp"
#include "transaudit/error.hpp"
#include "transaudit/judge.hpp"
#include "transaudit/repair.hpp"
#include "transaudit/report.hpp"
#include "transaudit/scores.hpp"

#ifndef TRANSAUDIT_VERSION
#define TRANSAUDIT_VERSION "0.0.0"
#endif

namespace transaudit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Thrown for problems with what the user handed us; maps to exit 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// JSON document with a path:line:col diagnostic on syntax errors.
nlohmann::json read_json(const fs::path& path) {
  const auto text = slurp(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(fmt::format("{}:{}:{}: invalid JSON ({})", path.string(), line, col, e.what()));
  }
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

// Files as given; directories contribute their *.jsonl files in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw InputError("no such file: " + a);
    }
  }
  return out;
}

std::vector<Corpus> load_corpora(const std::vector<fs::path>& paths) {
  std::vector<Corpus> out;
  for (const auto& p : paths) out.push_back(parse_jsonl_corpus(p));
  return out;
}

Corpus merge(const std::vector<Corpus>& parts) {
  std::vector<BenchmarkItem> items;
  for (const auto& c : parts) items.insert(items.end(), c.begin(), c.end());
  return Corpus(std::move(items));
}

std::vector<SegmentScore> load_all_scores(const std::vector<fs::path>& paths) {
  std::vector<SegmentScore> all;
  for (const auto& p : paths) {
    try {
      auto part = load_scores(p);
      all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } catch (const LineError& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  }
  return all;
}

int exit_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::EngineUnavailable:
    case ErrorKind::AuthFailure:
    case ErrorKind::RateLimited:
      return kExitExternal;
    case ErrorKind::EmptyOverlap:
      return kExitFindings;
    default:
      return kExitInput;
  }
}

ordered_json artifact_header(const RunConfig& c, bool stochastic) {
  ordered_json h;
  h["tool_version"] = TRANSAUDIT_VERSION;
  h["seed"] = c.seed.value;
  if (stochastic) {
    h["B"] = c.bootstrap.value;
    h["alpha"] = c.alpha.value;
  }
  return h;
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

// -- option holders ---------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bootstrap;
  std::optional<double> alpha;
  std::optional<std::size_t> parallelism;
};

struct AuditArgs {
  std::vector<std::string> corpus;
  std::vector<std::string> english;
  std::vector<std::string> languages;
  std::string out;
  std::size_t roster_cap = 100;
};

struct RepairArgs {
  std::vector<std::string> corpus;
  std::vector<std::string> english;
  std::string manifest;
  std::optional<std::string> engine;
  std::string cache;
  std::string out;
  std::string reformat = "prefix";
  bool dry_run = false;
};

struct AnalyzeArgs {
  std::vector<std::string> scores;
  std::string out;
  std::string mode = "ref_free";
  std::string system_a;
  std::string system_b;
  std::vector<std::string> systems;
  std::string dataset;
};

struct JudgeArgs {
  std::vector<std::string> items;
  std::vector<std::string> english;
  std::string pool;
  std::optional<std::size_t> pool_size;
  std::string annotations;
  std::string out;
  std::string prompt;
  std::string few_shots;
  std::string categories;
  std::optional<double> max_failure_fraction;
};

struct ReportArgs {
  std::string in;
  std::string kind = "all";
  std::string out;
  std::string system;
  std::string style;
};

RunConfig resolve(const Common& common, FlagValues flags, std::ostream& err) {
  flags.seed = common.seed;
  flags.bootstrap = common.bootstrap;
  flags.alpha = common.alpha;
  flags.parallelism = common.parallelism;
  std::optional<fs::path> file;
  if (!common.config.empty()) {
    file = common.config;
  } else if (const auto e = env("TRANSAUDIT_CONFIG")) {
    file = *e;
  }
  auto config = resolve_config(file, flags);
  err << "transaudit " << TRANSAUDIT_VERSION << " resolved config: " << describe(config).dump() << '\n';
  return config;
}

// -- audit ------------------------------------------------------------------

int cmd_audit(const Common& common, const AuditArgs& a, std::ostream& out, std::ostream& err) {
  FlagValues flags;
  if (!a.languages.empty()) flags.target_languages = a.languages;
  const auto config = resolve(common, flags, err);

  const auto corpus_paths = expand_inputs(a.corpus);
  const auto english_paths = expand_inputs(a.english);
  const auto corpora = load_corpora(corpus_paths);
  const auto english = load_corpora(english_paths);

  AuditOptions options;
  options.target_languages = config.target_languages.value;
  const auto report = audit(corpora, english, options);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_file(dir / "audit_report.json", to_json(report).dump(2) + "\n");
  const auto table = summary_table(report, a.roster_cap);
  write_file(dir / "audit_summary.txt", table);
  out << table;

  RunManifest m{"audit", {}, {"audit_report.json", "audit_summary.txt"}, {}};
  m.inputs = corpus_paths;
  m.inputs.insert(m.inputs.end(), english_paths.begin(), english_paths.end());
  m.parameters["target_languages"] = report.target_languages;
  m.parameters["seed"] = config.seed.value;
  write_run_manifest(dir, m);
  return report.clean() ? kExitOk : kExitFindings;
}

// -- repair -----------------------------------------------------------------

int cmd_repair(const Common& common, const RepairArgs& a, std::ostream& out, std::ostream& err) {
  FlagValues flags;
  flags.engine = a.engine;
  const auto config = resolve(common, flags, err);
  if (a.reformat != "prefix" && a.reformat != "none") throw InputError("--reformat must be 'prefix' or 'none'");
  if (!a.dry_run && a.out.empty()) throw InputError("--out is required unless --dry-run is given");

  const auto manifest = load_manifest(a.manifest);
  const auto corpus_paths = expand_inputs(a.corpus);
  const auto english_paths = expand_inputs(a.english);
  const auto target = merge(load_corpora(corpus_paths));
  const auto english = merge(load_corpora(english_paths));

  PlanOptions plan_options;
  plan_options.continuation = a.reformat == "prefix" ? ContinuationMode::prefix_context : ContinuationMode::none;
  const auto plan = plan_repair(target, english, manifest, plan_options);
  for (const auto& u : plan.unresolved) err << "unresolved " << u.key.to_string() << ": " << u.reason << '\n';

  auto cache = a.cache.empty() ? std::make_unique<TranslationCache>() : std::make_unique<TranslationCache>(a.cache);
  TranslateOptions topts;
  topts.source_language = config.source_language.value;
  topts.parallelism = config.parallelism.value;

  const auto& engine_name = config.engine.value;
  const bool mock = engine_name.rfind("mock", 0) == 0;
  if (!mock && engine_name != "deepl") throw InputError("unknown engine '" + engine_name + "'");

  if (a.dry_run) {
    for (const auto& b : plan.batches) {
      std::string slots;
      for (const auto& s : b.slots) slots += (slots.empty() ? "" : ",") + s.to_string();
      out << "plan " << b.source_key.to_string() << " " << slots << (b.create_from ? " (create)" : "") << '\n';
    }
    out << estimate_engine_calls(plan.batches, *cache, topts) << " engine calls\n";
    return kExitOk;
  }

  std::unique_ptr<TranslationEngine> engine;
  if (mock) {
    engine = MockEngine::from_spec(engine_name);
  } else {
    const auto key = env("TRANSAUDIT_ENGINE_KEY");
    if (!key) throw InputError("TRANSAUDIT_ENGINE_KEY is not set; no engine call was made");
    DeeplConfig dc;
    dc.base_url = config.engine_url.value;
    dc.api_key = *key;
    engine = std::make_unique<DeeplEngine>(std::move(dc));
  }

  const auto outcome = translate_batch(plan.batches, *engine, *cache, topts);
  auto result = apply_updates(target, outcome.batches, manifest);
  std::vector<ItemKey> touched;
  for (const auto& b : plan.batches) touched.push_back(b.source_key);
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  if (!touched.empty()) validate_post_translation(result.corpus, result.diagnostics, touched);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_jsonl_corpus(result.corpus, dir / "corpus.jsonl");
  {
    std::ofstream diag(dir / "diagnostics.jsonl", std::ios::binary | std::ios::trunc);
    write_diagnostics(result.diagnostics, diag);
  }
  std::map<DiagnosticStatus, std::size_t> tally;
  for (const auto& r : result.diagnostics) ++tally[r.status];
  out << fmt::format("engine calls: {}\ncache hits: {}\nupdated: {}\nunchanged: {}\nfailed: {}\nmanual_queue: {}\n",
                     outcome.engine_calls, outcome.cache_hits, tally[DiagnosticStatus::updated],
                     tally[DiagnosticStatus::unchanged], tally[DiagnosticStatus::failed],
                     tally[DiagnosticStatus::manual_queue]);

  RunManifest m{"repair", {}, {"corpus.jsonl", "diagnostics.jsonl"}, {}};
  m.inputs = corpus_paths;
  m.inputs.insert(m.inputs.end(), english_paths.begin(), english_paths.end());
  m.inputs.emplace_back(a.manifest);
  m.parameters["engine"] = engine->id();
  m.parameters["reformat"] = a.reformat;
  m.parameters["seed"] = config.seed.value;
  write_run_manifest(dir, m);

  if (outcome.engine_exhausted) {
    err << "engine exhausted its retries; affected items were left untouched\n";
    return kExitExternal;
  }
  return kExitOk;
}

// -- analyze ----------------------------------------------------------------

ScoreMode mode_of(const std::string& s) {
  const auto m = parse_score_mode(s);
  if (!m) throw InputError("--mode must be ref_free or ref_based");
  return *m;
}

int cmd_analyze(const std::string& sub, const Common& common, const AnalyzeArgs& a, std::ostream& out,
                std::ostream& err) {
  const auto config = resolve(common, {}, err);
  const auto paths = as_paths(a.scores);
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw InputError("no such file: " + p.string());
  }
  const auto scores = load_all_scores(paths);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto B = config.bootstrap.value;
  const auto alpha = config.alpha.value;
  const auto seed = config.seed.value;

  RunManifest m{"analyze " + sub, paths, {}, {}};
  m.parameters["seed"] = seed;
  int code = kExitOk;

  if (sub == "landscape") {
    const auto mode = mode_of(a.mode);
    const auto cells = landscape(scores, mode);
    if (cells.empty()) {
      err << "no scores in mode " << to_string(mode) << '\n';
      return kExitFindings;
    }
    auto doc = artifact_header(config, false);
    doc["mode"] = to_string(mode);
    auto arr = ordered_json::array();
    for (const auto& c : cells) arr.push_back(to_json(c));
    doc["cells"] = std::move(arr);
    write_file(dir / "cells.json", doc.dump(2) + "\n");
    write_file(dir / "cells.csv", cells_csv(cells));
    m.outputs = {"cells.json", "cells.csv"};
    out << cells.size() << " cells\n";
  } else if (sub == "compare" || sub == "refbased") {
    if (a.system_a.empty() || a.system_b.empty()) throw InputError("--system-a and --system-b are required");
    const bool ref = sub == "refbased";
    const auto mode = ref ? ScoreMode::ref_based : mode_of(a.mode);
    const auto deltas = ref ? ref_based_by_language(scores, a.system_a, a.system_b, B, alpha, seed)
                            : compare_cells(scores, a.system_a, a.system_b, mode, B, alpha, seed);
    if (deltas.empty()) {
      err << "empty overlap between " << a.system_a << " and " << a.system_b << '\n';
      return kExitFindings;
    }
    auto doc = artifact_header(config, true);
    doc["system_a"] = a.system_a;
    doc["system_b"] = a.system_b;
    doc["mode"] = to_string(mode);
    auto arr = ordered_json::array();
    for (const auto& d : deltas) arr.push_back(to_json(d));
    doc[ref ? "languages" : "cells"] = std::move(arr);
    const std::string stem = ref ? "refdelta" : "compare";
    write_file(dir / (stem + ".json"), doc.dump(2) + "\n");
    write_file(dir / (stem + ".csv"), deltas_csv(deltas));
    m.outputs = {stem + ".json", stem + ".csv"};
    m.parameters["B"] = B;
    m.parameters["alpha"] = alpha;
    out << deltas.size() << (ref ? " languages\n" : " cells\n");
  } else if (sub == "ranks") {
    const auto mode = mode_of(a.mode);
    std::vector<std::string> systems = a.systems;
    if (systems.empty()) {
      std::set<std::string> seen;
      for (const auto& s : scores) {
        if (s.mode == mode) seen.insert(s.system);
      }
      systems.assign(seen.begin(), seen.end());
    }
    std::optional<Dataset> dataset;
    if (!a.dataset.empty()) {
      dataset = parse_dataset(a.dataset);
      if (!dataset) throw InputError("unknown dataset '" + a.dataset + "'");
    }
    const auto r = rank_from_scores(scores, systems, mode, dataset, alpha);
    auto doc = artifact_header(config, false);
    doc["mode"] = to_string(mode);
    const auto body = to_json(r);
    for (const auto& [k, v] : body.items()) doc[k] = v;
    write_file(dir / "ranks.json", doc.dump(2) + "\n");
    m.outputs = {"ranks.json"};
    m.parameters["alpha"] = alpha;
    out << fmt::format("friedman chi2 = {:.6f}, p = {:.6f}, CD = {:.6f}\n", r.friedman_chi2, r.friedman_p, r.cd);
  } else {
    throw InputError("unknown analyze subcommand " + sub);
  }
  write_run_manifest(dir, m);
  return code;
}

// -- judge ------------------------------------------------------------------

std::vector<PoolMember> pool_for(const RunConfig& config, const std::string& pool_path) {
  return pool_path.empty() ? config.pool : load_pool(pool_path);
}

int cmd_judge_run(const Common& common, const JudgeArgs& a, std::ostream& out, std::ostream& err) {
  FlagValues flags;
  flags.max_failure_fraction = a.max_failure_fraction;
  const auto config = resolve(common, flags, err);
  const auto pool = pool_for(config, a.pool);
  std::vector<AnnotatorConfig> configs;
  for (const auto& m : pool) configs.push_back(m.config);
  validate_pool(configs);

  // Credentials and endpoints are checked for every member before anything else happens.
  struct Resolved {
    AnnotatorConfig config;
    std::string key;
  };
  std::vector<Resolved> live;
  for (const auto& m : pool) {
    if (m.mock) continue;
    const auto key = env(m.config.credentials_env);
    if (!key) throw InputError(m.config.credentials_env + " is not set for annotator '" + m.config.annotator_id + "'");
    auto cfg = m.config;
    if (const auto url = env(judge_env_name(cfg.annotator_id, "URL"))) cfg.endpoint = *url;
    if (cfg.endpoint.empty()) throw InputError("annotator '" + cfg.annotator_id + "' has no endpoint");
    if (cfg.model_name.empty()) throw InputError("annotator '" + cfg.annotator_id + "' has no model");
    live.push_back({std::move(cfg), *key});
  }

  const auto item_paths = expand_inputs(a.items);
  const auto english_paths = expand_inputs(a.english);
  const auto targets = merge(load_corpora(item_paths));
  const auto english = merge(load_corpora(english_paths));

  JudgeOptions options;
  options.parallelism = config.parallelism.value;
  options.max_failure_fraction = config.max_failure_fraction.value;
  std::optional<PromptTemplate> prompt;
  std::optional<CategoryMap> categories;
  if (!a.prompt.empty()) prompt = PromptTemplate::load(a.prompt);
  if (!a.categories.empty()) categories = CategoryMap::load(a.categories);
  if (!a.few_shots.empty()) options.few_shots = load_few_shots(a.few_shots);
  options.prompt = prompt ? &*prompt : nullptr;
  options.categories = categories ? &*categories : nullptr;

  const fs::path dir(a.out);
  ensure_dir(dir);
  options.store = dir / "annotations.jsonl";

  std::vector<std::unique_ptr<Annotator>> owned;
  std::size_t live_index = 0;
  for (const auto& m : pool) {
    if (m.mock) {
      owned.push_back(MockAnnotator::from_spec(m.config.annotator_id, *m.mock));
    } else {
      auto& r = live[live_index++];
      http::RetryPolicy retry;
      retry.max_attempts = r.config.max_retries;
      owned.push_back(std::make_unique<ChatAnnotator>(r.config, r.key, retry));
    }
  }
  std::vector<Annotator*> ptrs;
  for (auto& o : owned) ptrs.push_back(o.get());

  const auto result = run_judging(english, targets, ptrs, options);
  out << fmt::format("annotations: {}\ncalls: {}\nfailed calls: {}\nresumed: {}\n", result.annotations.size(),
                     result.calls, result.failed_calls, result.resumed);

  RunManifest m{"judge run", {}, {"annotations.jsonl"}, {}};
  m.inputs = item_paths;
  m.inputs.insert(m.inputs.end(), english_paths.begin(), english_paths.end());
  if (!a.pool.empty()) m.inputs.emplace_back(a.pool);
  auto ids = ordered_json::array();
  for (const auto& p : pool) ids.push_back(p.config.annotator_id);
  m.parameters["pool"] = std::move(ids);
  m.parameters["seed"] = config.seed.value;
  write_run_manifest(dir, m);
  return kExitOk;
}

int cmd_judge_aggregate(const Common& common, const JudgeArgs& a, std::ostream& out, std::ostream& err) {
  const auto config = resolve(common, {}, err);
  const fs::path dir(a.out);
  const fs::path ann_path = a.annotations.empty() ? dir / "annotations.jsonl" : fs::path(a.annotations);
  if (!fs::exists(ann_path)) throw InputError("no such file: " + ann_path.string());
  const auto annotations = load_annotations(ann_path);

  std::size_t pool_size = 0;
  if (a.pool_size) {
    pool_size = *a.pool_size;
  } else if (!a.pool.empty()) {
    pool_size = load_pool(a.pool).size();
  } else if (!config.pool.empty()) {
    pool_size = config.pool.size();
  } else {
    std::set<std::string> ids;
    for (const auto& x : annotations) ids.insert(x.annotator_id);
    pool_size = ids.size();
  }
  if (pool_size == 0) throw InputError("pool size is zero");

  std::optional<CategoryMap> categories;
  if (!a.categories.empty()) categories = CategoryMap::load(a.categories);
  const auto verdicts = aggregate(annotations, pool_size, categories ? *categories : CategoryMap::builtin());
  const auto rates = error_rates(verdicts);

  ensure_dir(dir);
  std::string lines;
  for (const auto& v : verdicts) lines += to_json(v).dump() + "\n";
  write_file(dir / "verdicts.jsonl", lines);
  write_file(dir / "rates.json", to_json(rates).dump(2) + "\n");
  write_file(dir / "rates.csv", rates_csv(rates));
  write_file(dir / "shares.csv", shares_csv(rates));
  out << fmt::format("verdicts: {}\nexcluded: {}\n", verdicts.size(), rates.excluded_total);

  RunManifest m{"judge aggregate", {ann_path}, {"verdicts.jsonl", "rates.json", "rates.csv", "shares.csv"}, {}};
  m.parameters["pool_size"] = pool_size;
  m.parameters["seed"] = config.seed.value;
  write_run_manifest(dir, m);
  return kExitOk;
}

// -- report -----------------------------------------------------------------

int cmd_report(const Common& common, const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const auto config = resolve(common, {}, err);
  static const std::vector<std::string> kinds = {"landscape", "delta", "cd", "refdelta", "errors"};
  std::vector<std::string> wanted;
  if (a.kind == "all") {
    wanted = kinds;
  } else if (std::find(kinds.begin(), kinds.end(), a.kind) != kinds.end()) {
    wanted = {a.kind};
  } else {
    throw InputError("--kind must be one of landscape, delta, cd, refdelta, errors, all");
  }
  const std::map<std::string, std::string> inputs = {{"landscape", "cells.json"},
                                                     {"delta", "compare.json"},
                                                     {"cd", "ranks.json"},
                                                     {"refdelta", "refdelta.json"},
                                                     {"errors", "rates.json"}};
  const fs::path in(a.in);
  for (const auto& k : wanted) {
    if (!fs::exists(in / inputs.at(k))) throw InputError("missing input " + (in / inputs.at(k)).string());
  }

  report::Style style;
  if (!a.style.empty()) {
    style = report::style_from_json(read_json(a.style));
  } else if (!config.style.is_null()) {
    style = report::style_from_json(config.style);
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  RunManifest m{"report", {}, {}, {}};
  m.parameters["kinds"] = wanted;
  for (const auto& k : wanted) {
    const auto path = in / inputs.at(k);
    const auto doc = read_json(path);
    m.inputs.push_back(path);
    report::Rendered r;
    if (k == "landscape") {
      std::vector<CellSummary> cells;
      for (const auto& c : doc.at("cells")) cells.push_back(cell_from_json(c));
      r = report::render_landscape(cells, a.system.empty() ? std::nullopt : std::optional(a.system), style);
    } else if (k == "delta") {
      std::vector<DeltaResult> deltas;
      for (const auto& d : doc.at("cells")) deltas.push_back(delta_from_json(d));
      r = report::render_delta_heatmap(deltas, style);
    } else if (k == "cd") {
      r = report::render_cd_diagram(ranks_from_json(doc));
    } else if (k == "refdelta") {
      std::vector<DeltaResult> deltas;
      for (const auto& d : doc.at("languages")) deltas.push_back(delta_from_json(d));
      r = report::render_ref_delta_bars(deltas);
    } else {
      r = report::render_error_overview(rates_from_json(doc));
    }
    write_file(dir / (k + ".svg"), r.svg);
    m.outputs.emplace_back(k + ".svg");
    if (!r.csv.empty()) {
      write_file(dir / (k + ".csv"), r.csv);
      m.outputs.emplace_back(k + ".csv");
    }
    out << "wrote " << (dir / (k + ".svg")).generic_string() << '\n';
  }
  write_run_manifest(dir, m);
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c, bool stochastic) {
  sub->add_option("--config", c.config, "TOML config file (also TRANSAUDIT_CONFIG)");
  sub->add_option("--parallelism", c.parallelism, "Concurrent requests");
  sub->add_option("--seed", c.seed, "Random seed");
  if (stochastic) {
    sub->add_option("--bootstrap", c.bootstrap, "Bootstrap replicates");
    sub->add_option("--alpha", c.alpha, "Significance level");
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Integrity audit, repair and quality analysis for machine-translated benchmarks", "transaudit"};
  app.set_version_flag("--version", TRANSAUDIT_VERSION);
  app.require_subcommand(1);

  Common common;
  AuditArgs audit_args;
  RepairArgs repair_args;
  AnalyzeArgs analyze_args;
  JudgeArgs judge_args;
  ReportArgs report_args;

  auto* audit_cmd = app.add_subcommand("audit", "Check structural integrity (criteria A-D)");
  add_common(audit_cmd, common, false);
  audit_cmd->add_option("--corpus", audit_args.corpus, "Translated corpus files or directories")->required();
  audit_cmd->add_option("--english", audit_args.english, "English corpus files or directories")->required();
  audit_cmd->add_option("--languages", audit_args.languages, "Target languages (default: all seen)");
  audit_cmd->add_option("--roster-cap", audit_args.roster_cap, "Keys printed per roster in the summary");
  audit_cmd->add_option("--out", audit_args.out, "Output directory")->required();

  auto* repair_cmd = app.add_subcommand("repair", "Re-translate defective fields listed in a manifest");
  add_common(repair_cmd, common, false);
  repair_cmd->add_option("--corpus", repair_args.corpus, "Translated corpus files or directories")->required();
  repair_cmd->add_option("--english", repair_args.english, "English corpus files or directories")->required();
  repair_cmd->add_option("--manifest", repair_args.manifest, "Repair manifest (JSONL)")->required();
  repair_cmd->add_option("--engine", repair_args.engine, "deepl or mock[:tag|identity|reverse|drop-marker|unavailable]");
  repair_cmd->add_option("--cache", repair_args.cache, "Translation cache file (JSONL)");
  repair_cmd->add_option("--reformat", repair_args.reformat, "Continuation options: prefix or none");
  repair_cmd->add_flag("--dry-run", repair_args.dry_run, "Print the plan and estimated engine calls only");
  repair_cmd->add_option("--out", repair_args.out, "Output directory");

  auto* analyze_cmd = app.add_subcommand("analyze", "Score analysis");
  analyze_cmd->require_subcommand(1);
  std::map<std::string, CLI::App*> analyze_subs;
  for (const auto* name : {"landscape", "compare", "ranks", "refbased"}) {
    auto* s = analyze_cmd->add_subcommand(name);
    add_common(s, common, true);
    s->add_option("--scores", analyze_args.scores, "Segment score files (JSONL)")->required();
    s->add_option("--out", analyze_args.out, "Output directory")->required();
    s->add_option("--mode", analyze_args.mode, "ref_free or ref_based");
    if (std::string(name) == "compare" || std::string(name) == "refbased") {
      s->add_option("--system-a", analyze_args.system_a, "First system")->required();
      s->add_option("--system-b", analyze_args.system_b, "Second system")->required();
    }
    if (std::string(name) == "ranks") {
      s->add_option("--systems", analyze_args.systems, "Systems to rank (default: all)");
      s->add_option("--dataset", analyze_args.dataset, "Restrict to one dataset");
    }
    analyze_subs[name] = s;
  }

  auto* judge_cmd = app.add_subcommand("judge", "LLM error annotation");
  judge_cmd->require_subcommand(1);
  auto* judge_run = judge_cmd->add_subcommand("run", "Annotate items with every annotator (resumable)");
  add_common(judge_run, common, false);
  judge_run->add_option("--items", judge_args.items, "Translated items to annotate")->required();
  judge_run->add_option("--english", judge_args.english, "English sources")->required();
  judge_run->add_option("--pool", judge_args.pool, "Annotator pool (TOML)");
  judge_run->add_option("--out", judge_args.out, "Output directory")->required();
  judge_run->add_option("--prompt", judge_args.prompt, "Prompt template");
  judge_run->add_option("--few-shots", judge_args.few_shots, "Few-shot exemplars (JSONL)");
  judge_run->add_option("--categories", judge_args.categories, "Category to bucket map (JSON)");
  judge_run->add_option("--max-failure-fraction", judge_args.max_failure_fraction, "Abort threshold");
  auto* judge_agg = judge_cmd->add_subcommand("aggregate", "Majority verdicts and error rates");
  add_common(judge_agg, common, false);
  judge_agg->add_option("--annotations", judge_args.annotations, "Annotations (default: <out>/annotations.jsonl)");
  judge_agg->add_option("--pool", judge_args.pool, "Annotator pool (TOML), sets the pool size");
  judge_agg->add_option("--pool-size", judge_args.pool_size, "Pool size M");
  judge_agg->add_option("--categories", judge_args.categories, "Category to bucket map (JSON)");
  judge_agg->add_option("--out", judge_args.out, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Render figures and companion tables");
  add_common(report_cmd, common, false);
  report_cmd->add_option("--in", report_args.in, "Directory with analysis and judge outputs")->required();
  report_cmd->add_option("--kind", report_args.kind, "landscape, delta, cd, refdelta, errors or all");
  report_cmd->add_option("--out", report_args.out, "Output directory")->required();
  report_cmd->add_option("--system", report_args.system, "System shown in the landscape");
  report_cmd->add_option("--style", report_args.style, "Colour scales (JSON)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (audit_cmd->parsed()) return cmd_audit(common, audit_args, out, err);
    if (repair_cmd->parsed()) return cmd_repair(common, repair_args, out, err);
    for (const auto& [name, s] : analyze_subs) {
      if (s->parsed()) return cmd_analyze(name, common, analyze_args, out, err);
    }
    if (judge_run->parsed()) return cmd_judge_run(common, judge_args, out, err);
    if (judge_agg->parsed()) return cmd_judge_aggregate(common, judge_args, out, err);
    if (report_cmd->parsed()) return cmd_report(common, report_args, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_for(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace transaudit::cli

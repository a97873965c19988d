// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "annotations.hpp"
#include "audit_fixture.hpp"
#include "fuzz.hpp"
#include "helpers.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "transaudit/audit.hpp"
#include "transaudit/engine.hpp"
#include "transaudit/error.hpp"
#include "transaudit/fragments.hpp"
#include "transaudit/judge.hpp"
#include "transaudit/random.hpp"
#include "transaudit/repair.hpp"
#include "transaudit/scores.hpp"
#include "transaudit/stats.hpp"

using namespace transaudit;
using testing::key;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string corpus_bytes(const Corpus& c) {
  std::ostringstream out;
  write_jsonl_corpus(c, out);
  return out.str();
}

// -- 1 -----------------------------------------------------------------------
Outcome nemenyi_constant() {
  const double cd = stats::nemenyi_cd(3, 5, 0.05);
  return {cd >= 1.47 && cd <= 1.49, fmt::format("CD(k=3, N=5, alpha=0.05) = {:.4f}", cd)};
}

// -- 2 -----------------------------------------------------------------------
Outcome mmlu_significance() {
  // First system ranks first everywhere; the other two split 2-3 as 3:2.
  const std::vector<std::vector<double>> rows{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 3, 2}, {1, 3, 2}};
  const auto r = analyze_ranks({"eu20", "okapi", "global"}, {"de", "es", "fr", "it", "ro"}, rows);
  const auto& p = r.pairwise;  // (eu20, okapi), (eu20, global), (okapi, global)
  const bool ranks = r.avg_ranks == std::vector<double>{1.0, 2.4, 2.6};
  const bool gaps = std::fabs(p[0].gap - 1.4) < 1e-12 && std::fabs(p[1].gap - 1.6) < 1e-12 &&
                    std::fabs(p[2].gap - 0.2) < 1e-12;
  const bool verdicts = !p[0].significant && p[1].significant && !p[2].significant;
  return {ranks && gaps && verdicts,
          fmt::format("avg ranks {:.2f}/{:.2f}/{:.2f}, gaps {:.2f} {:.2f} {:.2f}, significant {}/{}/{}", r.avg_ranks[0],
                      r.avg_ranks[1], r.avg_ranks[2], p[0].gap, p[1].gap, p[2].gap, p[0].significant,
                      p[1].significant, p[2].significant)};
}

// -- 3 -----------------------------------------------------------------------
Outcome leakage_bound() {
  const double v = estimate_leakage_inflation({99, 10042, 10, 0.25});
  return {std::fabs(v - 0.075) <= 0.01, fmt::format("inflation = {:.4f} pp", v)};
}

// -- 4 -----------------------------------------------------------------------
Outcome friedman_oracle() {
  const std::vector<std::vector<double>> unanimous(5, {1, 2, 3});
  const auto u = stats::friedman_test(unanimous);
  const std::vector<std::vector<double>> tied(5, {2, 2, 2});
  const auto t = stats::friedman_test(tied);
  // With 2 df the chi-square survival function is exp(-x/2).
  const bool ok = u.chi2 == oracle::friedman_chi2(unanimous) && std::fabs(u.chi2 - 10.0) < 1e-12 &&
                  std::fabs(u.p - std::exp(-5.0)) < 1e-12 && std::fabs(u.p - 0.0067) <= 1e-4 && t.chi2 == 0.0;
  return {ok, fmt::format("unanimous chi2 = {:.6f}, p = {:.6f}; tied chi2 = {}", u.chi2, u.p, t.chi2)};
}

// -- 5 -----------------------------------------------------------------------
bool constant(const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; }); }

// Compares one pair; constant inputs must be refused.
bool spearman_agrees(const std::vector<double>& x, const std::vector<double>& y, double& worst) {
  if (constant(x) || constant(y)) {
    try {
      stats::spearman(x, y);
      return false;
    } catch (const Error& e) {
      return e.kind() == ErrorKind::DegenerateInput;
    }
  }
  const double got = stats::spearman(x, y).rho;
  const double want = oracle::spearman(x, y);
  worst = std::max(worst, std::fabs(got - want));
  return std::fabs(got - want) <= 1e-12;
}

// Every vector in {1..n}^n, i.e. every rank configuration with ties.
std::vector<std::vector<double>> all_configurations(std::size_t n) {
  std::vector<std::vector<double>> out;
  std::vector<double> v(n, 1.0);
  while (true) {
    out.push_back(v);
    std::size_t i = 0;
    while (i < n && v[i] == static_cast<double>(n)) v[i++] = 1.0;
    if (i == n) break;
    v[i] += 1.0;
  }
  return out;
}

Outcome spearman_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  bool ok = true;
  // n <= 4: every pair of configurations.
  for (std::size_t n = 3; n <= 4; ++n) {
    const auto all = all_configurations(n);
    for (const auto& x : all) {
      for (const auto& y : all) {
        ok = spearman_agrees(x, y, worst) && ok;
        ++cases;
      }
    }
  }
  // n = 5, 6: rho is invariant under a joint reordering of positions, so
  // pairing every configuration with the identity covers every tie-free y.
  for (std::size_t n = 5; n <= 6; ++n) {
    std::vector<double> identity(n);
    for (std::size_t i = 0; i < n; ++i) identity[i] = static_cast<double>(i + 1);
    for (const auto& x : all_configurations(n)) {
      ok = spearman_agrees(x, identity, worst) && ok;
      ++cases;
    }
  }
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto n = 3 + rng.index(10);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (auto& v : x) v = static_cast<double>(rng.index(5));
    for (auto& v : y) v = static_cast<double>(rng.index(5));
    ok = spearman_agrees(x, y, worst) && ok;
    ++cases;
  }
  const std::vector<double> up{1, 2, 3, 4, 5, 6};
  const std::vector<double> up2{10, 20, 25, 70, 80, 100};
  const std::vector<double> down{9, 7, 5, 3, 2, 1};
  ok = ok && stats::spearman(up, up2).rho == 1.0 && stats::spearman(up, down).rho == -1.0;
  const double secs = seconds_since(t0);
  ok = ok && secs < 10.0;
  return {ok, fmt::format("{} pairs, max |diff| = {:.2e}, monotone signs ok, {:.2f} s", cases, worst, secs)};
}

// -- 6 -----------------------------------------------------------------------
Outcome bootstrap_calibration() {
  const auto t0 = Clock::now();
  constexpr int kTrials = 500;
  constexpr std::size_t kPairs = 200;
  constexpr double kShift = 0.03;
  constexpr double kSigma = 0.05;
  int covered = 0;
  Rng rng(6);
  for (int trial = 0; trial < kTrials; ++trial) {
    // Each system scores around a common level with its own N(0, sigma) noise;
    // the population median difference equals the shift.
    PairedSet p;
    p.system_a = "a";
    p.system_b = "b";
    for (std::size_t i = 0; i < kPairs; ++i) {
      const double a = 0.7 + kShift + kSigma * rng.normal();
      const double b = 0.7 + kSigma * rng.normal();
      p.pairs.push_back({key("de", Dataset::arc, Split::test, std::to_string(i)), a, b});
    }
    std::sort(p.pairs.begin(), p.pairs.end(), [](const ScorePair& l, const ScorePair& r) { return l.key < r.key; });
    const auto r = paired_bootstrap_ci(p, 2000, 0.05, 1000 + static_cast<std::uint64_t>(trial));
    covered += (r.ci_low <= kShift && kShift <= r.ci_high) ? 1 : 0;
  }
  const double coverage = 100.0 * covered / kTrials;

  PairedSet flat;
  flat.system_a = "a";
  flat.system_b = "b";
  for (std::size_t i = 0; i < 64; ++i) {
    const double b = static_cast<double>(i % 17) / 32.0;
    flat.pairs.push_back({key("de", Dataset::arc, Split::test, std::to_string(i)), b + 0.125, b});
  }
  std::sort(flat.pairs.begin(), flat.pairs.end(), [](const ScorePair& l, const ScorePair& r) { return l.key < r.key; });
  const auto d = paired_bootstrap_ci(flat, 2000);
  const bool degenerate = d.ci_low == 0.125 && d.ci_high == 0.125;

  const double secs = seconds_since(t0);
  const bool ok = std::fabs(coverage - 95.0) <= 2.0 && degenerate && secs < 60.0;
  return {ok, fmt::format("coverage {:.1f}% over {} trials (n={}, B=2000); constant shift CI [{}, {}]; {:.1f} s",
                          coverage, kTrials, kPairs, d.ci_low, d.ci_high, secs)};
}

// -- 7 -----------------------------------------------------------------------
Outcome majority_oracle() {
  const auto item = key("de", Dataset::arc, Split::test, "1");
  std::size_t profiles = 0;
  std::size_t mismatches = 0;
  bool precedence = true;
  bool clean_rule = true;
  // -1 abstains, 0 answers "no error", 1..63 flag (bucket, severity) sets.
  for (int m0 = -1; m0 < 64; ++m0) {
    for (int m1 = -1; m1 < 64; ++m1) {
      for (int m2 = -1; m2 < 64; ++m2) {
        const std::vector<int> masks{m0, m1, m2};
        const std::vector<ItemAnnotation> anns{testing::annotation_from_mask(item, "a", m0),
                                               testing::annotation_from_mask(item, "b", m1),
                                               testing::annotation_from_mask(item, "c", m2)};
        const auto got = majority_vote(anns, CategoryMap::builtin(), 3);
        const auto want = oracle::vote(masks, 3);
        ++profiles;
        bool same = got.excluded == want.excluded && (got.excluded || got.clean == want.clean);
        if (!got.excluded) {
          for (int b = 0; b < 3; ++b) {
            same = same && got.present[b] == want.present[b];
            for (int s = 0; s < 2; ++s) same = same && got.maj[b][s] == want.maj[b][s];
            precedence = precedence && !(got.maj[b][0] && got.maj[b][1]);
          }
        }
        if (got.clean) {
          const auto spanless = std::count(masks.begin(), masks.end(), 0);
          clean_rule = clean_rule && spanless >= 2;
        }
        mismatches += same ? 0 : 1;
      }
    }
  }
  return {mismatches == 0 && precedence && clean_rule,
          fmt::format("{} joint profiles, {} disagreements with enumeration; precedence {}; clean rule {}", profiles,
                      mismatches, precedence ? "holds" : "violated", clean_rule ? "holds" : "violated")};
}

// -- 8 -----------------------------------------------------------------------
MajorityVerdict verdict(const std::string& lang, Dataset ds, std::size_t i) {
  MajorityVerdict v;
  v.key = key(lang, ds, Split::test, std::to_string(i));
  v.pool_size = 3;
  v.valid = 3;
  return v;
}

Outcome share_arithmetic() {
  std::vector<MajorityVerdict> pooled;
  for (std::size_t i = 0; i < 1000; ++i) {
    auto v = verdict("de", Dataset::arc, i);
    v.maj[0][i < 739 ? 0 : 1] = true;
    v.raw[0] = v.maj[0];
    v.present[0] = true;
    pooled.push_back(v);
  }
  const auto shares = error_rates(pooled).shares;
  const auto& am = shares[0];
  const bool display = am.bucket == Bucket::accuracy && am.major_share && *am.major_share == 73.9 &&
                       *am.minor_share == 26.1 && shares_csv(error_rates(pooled)).find("73.9") != std::string::npos;

  bool sums = true;
  for (std::size_t major = 0; major <= 60; ++major) {
    for (std::size_t minor = 0; minor <= 60; ++minor) {
      if (major + minor == 0) continue;
      std::vector<MajorityVerdict> vs;
      for (std::size_t i = 0; i < major + minor; ++i) {
        auto v = verdict("fr", Dataset::mmlu, i);
        v.maj[2][i < major ? 0 : 1] = true;
        v.present[2] = true;
        vs.push_back(v);
      }
      const auto s = error_rates(vs).shares[2];
      sums = sums && std::fabs(*s.major_share + *s.minor_share - 100.0) < 1e-9;
    }
  }

  std::vector<MajorityVerdict> lv;
  for (std::size_t i = 0; i < 1000; ++i) {
    auto v = verdict("lv", Dataset::hellaswag, i);
    if (i < 744) {
      v.maj[0][0] = v.raw[0][0] = v.present[0] = true;
    } else {
      v.clean = true;
    }
    lv.push_back(v);
  }
  const auto rates = error_rates(lv);
  const double rate = (*rates.cells[0].rate)[0];
  return {display && sums && rate == 744.0,
          fmt::format("A+M shares {:.1f}/{:.1f}; sums to 100 over 0..60 x 0..60: {}; LV HellaSwag {:.0f}/1k",
                      am.major_share.value_or(-1), am.minor_share.value_or(-1), sums, rate)};
}

// -- 9 -----------------------------------------------------------------------
std::vector<std::string> names(const Roster& r) {
  std::vector<std::string> out;
  for (const auto& k : r) out.push_back(k.to_string());
  return out;
}

Outcome audit_exactness() {
  const auto f = testing::make_audit_fixture();
  const auto report = audit(f.targets, f.english);
  const auto* test = report.group(Dataset::arc, Split::test);
  const auto* val = report.group(Dataset::arc, Split::validation);
  bool ok = test != nullptr && val != nullptr;
  ok = ok && test->n_en == 5 && test->n_t == 15 && test->n_c == 2 && test->n_l == 2;
  ok = ok && val->n_en == 3 && val->n_t == 7 && val->n_c == 0 && val->n_l == 4;
  ok = ok && names(test->incomplete) == std::vector<std::string>{"de/arc//test/t1", "fr/arc//test/t3"};
  ok = ok && names(test->inconsistent) == std::vector<std::string>{"it/arc//test/v2"};
  ok = ok && names(test->uncovered) == std::vector<std::string>{"fr/arc//test/t4", "it/arc//test/t4"};
  ok = ok && names(val->uncovered) == std::vector<std::string>{"de/arc//validation/v0", "de/arc//validation/v2",
                                                               "fr/arc//validation/v2", "it/arc//validation/v0"};

  const auto clone = testing::make_complete_clone(3548, 20);
  const auto full = audit(clone.targets, clone.english);
  const auto& g = full.groups.at(0);
  const bool identity = g.n_en == 3548 && g.n_t == 70960 && g.n_t == 20 * g.n_en && g.n_c == 0 && g.n_l == 0;
  return {ok && identity, fmt::format("fixture test N_C/N_L = {}/{}, validation {}/{}; clone N_en {} -> N_T {}",
                                      test ? test->n_c : 0, test ? test->n_l : 0, val ? val->n_c : 0,
                                      val ? val->n_l : 0, g.n_en, g.n_t)};
}

// -- 10 ----------------------------------------------------------------------
Outcome serialization_fuzz() {
  Rng rng(10);
  std::size_t round_trips = 0;
  std::size_t mismatches_raised = 0;
  std::size_t injections = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto fragments = testing::random_fragments(rng);
    const auto payload = serialize_fragments(fragments);
    round_trips += deserialize_fragments(payload, fragments.size()) == fragments ? 1 : 0;
    for (const std::size_t wrong : {fragments.size() + 1, fragments.size() - 1}) {
      if (wrong == 0) continue;
      ++injections;
      try {
        deserialize_fragments(payload, wrong);
      } catch (const FragmentCountMismatch&) {
        ++mismatches_raised;
      }
    }
  }

  // An engine that drops a marker must leave the corpus untouched.
  std::vector<BenchmarkItem> en;
  std::vector<BenchmarkItem> de;
  for (int i = 0; i < 200; ++i) {
    const auto id = "f" + std::to_string(i);
    std::vector<std::string> choices;
    for (int c = 0; c < 4; ++c) choices.push_back("x" + testing::random_fragment(rng));
    en.push_back(testing::mc(key("en", Dataset::arc, Split::test, id), "q" + testing::random_fragment(rng), choices, i % 4));
    auto t = testing::mc(key("de", Dataset::arc, Split::test, id), "f" + testing::random_fragment(rng), choices, i % 4);
    (*t.choices)[i % 4] = "";
    (*t.choices)[(i + 1) % 4] = "";
    de.push_back(t);
  }
  const Corpus english(en);
  const Corpus target(de);
  const auto before = corpus_bytes(target);
  std::istringstream manifest_text(R"({"language":"de","dataset":"arc","split":"test"})");
  const auto manifest = parse_manifest(manifest_text);
  const auto plan = plan_repair(target, english, manifest);
  auto engine = MockEngine::dropping_marker();
  TranslationCache cache;
  const auto outcome = translate_batch(plan.batches, *engine, cache);
  const auto updated = apply_updates(target, outcome.batches, manifest);
  const bool untouched = corpus_bytes(updated.corpus) == before && cache.size() == 0;
  const bool queued = std::all_of(updated.diagnostics.begin(), updated.diagnostics.end(),
                                  [](const DiagnosticsRecord& d) { return d.status == DiagnosticStatus::manual_queue; });

  return {round_trips == 10000 && mismatches_raised == injections && untouched && queued,
          fmt::format("{}/10000 round trips; {}/{} injected count errors raised; corpus {} after {} dropped-marker batches",
                      round_trips, mismatches_raised, injections, untouched ? "byte-identical" : "CHANGED",
                      plan.batches.size())};
}

// -- 11 ----------------------------------------------------------------------
Outcome cache_idempotence() {
  const auto dir = testing::temp_dir("acceptance-cache");
  std::vector<BenchmarkItem> en;
  std::vector<BenchmarkItem> de;
  for (int i = 0; i < 30; ++i) {
    const auto id = "c" + std::to_string(i);
    en.push_back(testing::mc(key("en", Dataset::arc, Split::test, id), "Question " + id,
                             {"one " + id, "two " + id, "three " + id, "four " + id}, i % 4));
    auto t = testing::mc(key("de", Dataset::arc, Split::test, id), "Frage " + id,
                         {"eins " + id, "zwei " + id, "drei " + id, "vier " + id}, i % 4);
    if (i % 3 == 0) (*t.choices)[1] = "";
    if (i % 5 == 0) *t.question = "";
    de.push_back(t);
  }
  const Corpus english(en);
  const Corpus target(de);
  std::istringstream manifest_text(R"({"language":"de","dataset":"arc","split":"test"})");
  const auto manifest = parse_manifest(manifest_text);
  const auto clock = [] { return std::string("2024-01-01T00:00:00Z"); };

  auto engine = MockEngine::tagging();
  TranslationCache cache(dir / "cache.jsonl");
  const auto run = [&](const Corpus& c, TranslationCache& k) {
    const auto plan = plan_repair(c, english, manifest);
    auto outcome = translate_batch(plan.batches, *engine, k);
    auto updated = apply_updates(c, outcome.batches, manifest, clock);
    return std::make_pair(std::move(outcome), std::move(updated));
  };

  const auto [first_out, first] = run(target, cache);
  const auto calls_after_first = engine->calls();
  // Same inputs again: everything comes from the cache, including after a reload.
  const auto [again_out, again] = run(target, cache);
  TranslationCache reloaded(dir / "cache.jsonl");
  const auto [reload_out, reload] = run(target, reloaded);
  // On the repaired corpus there is nothing left to update.
  const auto [clean_out, clean] = run(first.corpus, cache);

  const auto bytes = corpus_bytes(first.corpus);
  const bool ok = calls_after_first > 0 && engine->calls() == calls_after_first && again_out.engine_calls == 0 &&
                  reload_out.engine_calls == 0 && clean_out.engine_calls == 0 && corpus_bytes(again.corpus) == bytes &&
                  corpus_bytes(reload.corpus) == bytes && corpus_bytes(clean.corpus) == bytes &&
                  clean.diagnostics.empty();
  return {ok, fmt::format("first run {} engine calls; repeats {}/{}/{} calls; corpus byte-identical; "
                          "{} diagnostics on the repaired corpus",
                          first_out.engine_calls, again_out.engine_calls, reload_out.engine_calls,
                          clean_out.engine_calls, clean.diagnostics.size())};
}

// -- 12 ----------------------------------------------------------------------
Outcome end_to_end_determinism() {
  const auto a = testing::temp_dir("acceptance-e2e-a");
  const auto b = testing::temp_dir("acceptance-e2e-b");
  const int ca = testing::run_pipeline(a);
  const int cb = testing::run_pipeline(b);
  if (ca != 0 || cb != 0) return {false, fmt::format("pipeline exit codes {} and {}", ca, cb)};
  std::size_t identical = 0;
  std::size_t golden = 0;
  for (const auto& rel : testing::golden_files()) {
    const auto x = testing::read_text(a / rel);
    identical += (!x.empty() && x == testing::read_text(b / rel)) ? 1 : 0;
    golden += x == testing::read_text(testing::golden_dir() / rel) ? 1 : 0;
  }
  const auto n = testing::golden_files().size();
  return {identical == n && golden == n,
          fmt::format("{}/{} artifacts byte-identical across runs, {}/{} match goldens", identical, n, golden, n)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Nemenyi critical difference constant", nemenyi_constant},
      {"MMLU rank significance", mmlu_significance},
      {"few-shot leakage bound", leakage_bound},
      {"Friedman oracle", friedman_oracle},
      {"Spearman oracle equivalence", spearman_oracle},
      {"bootstrap calibration", bootstrap_calibration},
      {"majority-vote oracle", majority_oracle},
      {"severity-share arithmetic", share_arithmetic},
      {"audit fixture exactness", audit_exactness},
      {"serialization fuzz", serialization_fuzz},
      {"cache idempotence", cache_idempotence},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {:>2} {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
              << std::endl;
  }
  return failed;
}

#include <doctest.h>

#include <functional>
#include <sstream>

#include "helpers.hpp"
#include "oracles.hpp"
#include "transaudit/error.hpp"
#include "transaudit/random.hpp"
#include "transaudit/scores.hpp"

using namespace transaudit;
using testing::key;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::ConfigError;
}

std::vector<SegmentScore> parse(const std::string& text) {
  std::istringstream in(text);
  return load_scores(in);
}

SegmentScore score(const std::string& system, const std::string& lang, Dataset ds, const std::string& id, double value,
                   ScoreMode mode = ScoreMode::ref_free) {
  SegmentScore s;
  s.key = key(lang, ds, Split::test, id);
  s.system = system;
  s.mode = mode;
  s.score = value;
  return s;
}

PairedSet paired(const std::vector<double>& a, const std::vector<double>& b) {
  PairedSet p;
  p.system_a = "a";
  p.system_b = "b";
  for (std::size_t i = 0; i < a.size(); ++i) {
    p.pairs.push_back({key("de", Dataset::arc, Split::test, std::to_string(1000 + i)), a[i], b[i]});
  }
  return p;
}

}  // namespace

TEST_CASE("score records load with optional length fields") {
  const auto s = parse(
      R"({"language":"de","dataset":"arc","split":"test","id":"1","system":"x","mode":"ref_free","score":0.5,"target_text":"zwei  Wörter"})"
      "\n"
      R"({"language":"de","dataset":"arc","split":"test","id":"1","system":"x","mode":"ref_based","score":1,"word_count":7})"
      "\n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].word_count == 2u);
  CHECK(s[1].word_count == 7u);
  CHECK(s[1].mode == ScoreMode::ref_based);
}

TEST_CASE("score record errors") {
  const std::string base = R"({"language":"de","dataset":"arc","split":"test","id":"1","system":"x","mode":"ref_free",)";
  CHECK(kind_of([&] { parse(base + R"("score":1.2})"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(kind_of([&] { parse(base + R"("score":-0.1})"); }) == ErrorKind::ScoreOutOfRange);
  CHECK(kind_of([&] { parse(base + R"("score":0.3})" + "\n" + base + R"("score":0.4})"); }) ==
        ErrorKind::DuplicateScore);
  CHECK(kind_of([&] { parse(base.substr(0, base.size() - 1) + "}"); }) == ErrorKind::MissingKeyField);
  CHECK(kind_of([&] { parse(R"({"language":"de","dataset":"arc","split":"test","id":"1","mode":"ref_free","score":0.1})"); }) ==
        ErrorKind::MissingKeyField);
  try {
    parse(base + R"("score":0.3})" + "\n{");
    FAIL("expected MalformedLine");
  } catch (const LineError& e) {
    CHECK(e.line_no() == 2);
  }
  CHECK(parse("").empty());
}

TEST_CASE("word counts are runs of non-whitespace") {
  CHECK(word_count("") == 0);
  CHECK(word_count("   ") == 0);
  CHECK(word_count("one") == 1);
  CHECK(word_count(" a  b\tc\nd ") == 4);
  CHECK(word_count("Ελλάδα και Βουλγαρία") == 3);
}

TEST_CASE("cell summary quartiles, length and correlation") {
  std::vector<SegmentScore> cell;
  const std::vector<double> values{0.9, 0.1, 0.5, 0.7, 0.3};
  const std::vector<double> lengths{10, 2, 6, 8, 4};
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto s = score("x", "de", Dataset::arc, std::to_string(i), values[i]);
    s.word_count = static_cast<std::size_t>(lengths[i]);
    cell.push_back(s);
  }
  const auto c = cell_summary(cell);
  CHECK(c.n == 5);
  CHECK(c.median == doctest::Approx(0.5));
  CHECK(c.q1 == doctest::Approx(0.3));
  CHECK(c.q3 == doctest::Approx(0.7));
  CHECK(c.iqr == doctest::Approx(0.4));
  CHECK(*c.median_word_count == doctest::Approx(6));
  CHECK(*c.spearman_rho == doctest::Approx(1.0));

  for (auto& s : cell) s.word_count.reset();
  const auto bare = cell_summary(cell);
  CHECK_FALSE(bare.median_word_count.has_value());
  CHECK_FALSE(bare.spearman_rho.has_value());
  CHECK(kind_of([] { cell_summary(std::vector<SegmentScore>{}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("landscape has one cell per system, language and dataset") {
  std::vector<SegmentScore> all;
  for (const std::string sys : {"b", "a"}) {
    for (const std::string lang : {"fr", "de"}) {
      for (int i = 0; i < 3; ++i) all.push_back(score(sys, lang, Dataset::arc, std::to_string(i), 0.1 * i));
    }
  }
  all.push_back(score("a", "de", Dataset::arc, "9", 0.9, ScoreMode::ref_based));
  const auto cells = landscape(all);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].system == "a");
  CHECK(cells[0].language == "de");
  CHECK(cells[0].n == 3);
  CHECK(cells[3].system == "b");
  CHECK(cells[3].language == "fr");
  CHECK(landscape(all, ScoreMode::ref_based).size() == 1);
}

TEST_CASE("paired overlap keeps shared keys only") {
  std::vector<SegmentScore> all{
      score("a", "de", Dataset::arc, "1", 0.5), score("a", "de", Dataset::arc, "2", 0.6),
      score("b", "de", Dataset::arc, "2", 0.4), score("b", "de", Dataset::arc, "3", 0.9),
      score("b", "de", Dataset::arc, "1", 0.2, ScoreMode::ref_based)};
  const auto p = paired_overlap(all, "a", "b", ScoreMode::ref_free);
  REQUIRE(p.n() == 1);
  CHECK(p.pairs[0].key.id == "2");
  CHECK(p.pairs[0].a == 0.6);
  CHECK(p.pairs[0].b == 0.4);
  CHECK(paired_overlap(all, "a", "c", ScoreMode::ref_free).n() == 0);
  CHECK(kind_of([&] { paired_overlap(all, "a", "b"); }) == ErrorKind::ModeMismatch);

  const std::vector<std::string> three{"a", "b", "c"};
  CHECK(aligned_overlap(all, three, ScoreMode::ref_free).keys.empty());
  const std::vector<std::string> one{"a"};
  CHECK(kind_of([&] { aligned_overlap(all, one, ScoreMode::ref_free); }) == ErrorKind::DomainError);
}

TEST_CASE("median delta and win rate") {
  const auto p = paired({0.9, 0.5, 0.3, 0.8}, {0.7, 0.5, 0.4, 0.2});
  const auto d = median_delta_and_winrate(p);
  CHECK(d.delta == doctest::Approx(oracle::median({0.9, 0.5, 0.3, 0.8}) - oracle::median({0.7, 0.5, 0.4, 0.2})));
  CHECK(d.wins == 2);
  CHECK(d.losses == 1);
  CHECK(d.ties == 1);
  CHECK(d.win_rate == doctest::Approx(0.5));
  CHECK(kind_of([] { median_delta_and_winrate(PairedSet{}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("bootstrap is reproducible and seed dependent") {
  Rng rng(1);
  std::vector<double> a(60);
  std::vector<double> b(60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  const auto p = paired(a, b);
  const auto r1 = paired_bootstrap_ci(p, 500, 0.05, 42);
  const auto r2 = paired_bootstrap_ci(p, 500, 0.05, 42);
  CHECK(r1.ci_low == r2.ci_low);
  CHECK(r1.ci_high == r2.ci_high);
  const auto r3 = paired_bootstrap_ci(p, 500, 0.05, 43);
  CHECK((r3.ci_low != r1.ci_low || r3.ci_high != r1.ci_high));
  CHECK(r1.ci_low <= r1.ci_high);
  CHECK(r1.delta == doctest::Approx(oracle::median(a) - oracle::median(b)));
  CHECK(r1.significant == (r1.ci_low > 0 || r1.ci_high < 0));

  const auto narrow = paired_bootstrap_ci(p, 500, 0.5, 42);
  CHECK(narrow.ci_low >= r1.ci_low);
  CHECK(narrow.ci_high <= r1.ci_high);
}

TEST_CASE("a constant shift gives a degenerate interval") {
  std::vector<double> a;
  std::vector<double> b;
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    const double v = 0.25 * rng.uniform();
    b.push_back(v);
    a.push_back(v + 0.5);
  }
  const auto r = paired_bootstrap_ci(paired(a, b), 300);
  CHECK(r.delta == doctest::Approx(0.5));
  CHECK(r.ci_low == doctest::Approx(0.5));
  CHECK(r.ci_high == doctest::Approx(0.5));
  CHECK(r.significant);
  CHECK(r.win_rate == 1.0);
}

TEST_CASE("bootstrap argument errors") {
  const auto p = paired({0.1, 0.2}, {0.3, 0.4});
  CHECK(kind_of([&] { paired_bootstrap_ci(paired({0.1}, {0.2})); }) == ErrorKind::InsufficientData);
  CHECK(kind_of([&] { paired_bootstrap_ci(p, 0); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { paired_bootstrap_ci(p, 10, 0.0); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { paired_bootstrap_ci(p, 10, 1.0); }) == ErrorKind::DomainError);
  CHECK(kind_of([&] { ref_based_delta(p); }) == ErrorKind::ModeMismatch);
}

TEST_CASE("per-cell comparison and per-language reference deltas") {
  std::vector<SegmentScore> all;
  for (const std::string lang : {"de", "fr"}) {
    for (const auto ds : {Dataset::arc, Dataset::mmlu}) {
      for (int i = 0; i < 10; ++i) {
        const double v = 0.05 * i;
        for (const auto mode : {ScoreMode::ref_free, ScoreMode::ref_based}) {
          all.push_back(score("a", lang, ds, std::to_string(i), v + 0.1, mode));
          all.push_back(score("b", lang, ds, std::to_string(i), v, mode));
        }
      }
    }
  }
  const auto cells = compare_cells(all, "a", "b", ScoreMode::ref_free, 200, 0.05, 7);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) {
    CHECK(c.n == 10);
    CHECK(c.delta == doctest::Approx(0.1));
    CHECK(c.seed == 7);
    CHECK(c.dataset.has_value());
  }
  CHECK(cells[0].language == "de");

  const auto langs = ref_based_by_language(all, "a", "b", 200, 0.05, 7);
  REQUIRE(langs.size() == 2);
  CHECK(langs[0].n == 20);
  CHECK(langs[0].mode == ScoreMode::ref_based);
  CHECK(langs[1].language == "fr");
  CHECK(compare_cells(all, "a", "zzz", ScoreMode::ref_free, 200, 0.05, 7).empty());
}

TEST_CASE("ranks over five blocks reproduce the three-system example") {
  // First system always wins; the other two split the remaining places 3:2.
  const std::vector<std::vector<double>> rows{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 3, 2}, {1, 3, 2}};
  const auto r = analyze_ranks({"eu20", "okapi", "global"}, {"de", "es", "fr", "it", "ro"}, rows);
  CHECK(r.avg_ranks[0] == doctest::Approx(1.0));
  CHECK(r.avg_ranks[1] == doctest::Approx(2.4));
  CHECK(r.avg_ranks[2] == doctest::Approx(2.6));
  CHECK(r.friedman_chi2 == doctest::Approx(oracle::friedman_chi2(rows)));
  CHECK(r.cd == doctest::Approx(1.4818).epsilon(1e-3));
  REQUIRE(r.pairwise.size() == 3);
  CHECK_FALSE(r.pairwise[0].significant);
  CHECK(r.pairwise[1].significant);
  CHECK_FALSE(r.pairwise[2].significant);
  CHECK(kind_of([&] { analyze_ranks({"a", "b"}, {"de", "fr", "it"}, rows); }) == ErrorKind::DimensionMismatch);

  const auto round = ranks_from_json(to_json(r));
  CHECK(round.avg_ranks == r.avg_ranks);
  CHECK(round.cd == r.cd);
  CHECK(round.blocks == r.blocks);
}

TEST_CASE("ranks from scores use the k-way overlap per language") {
  std::vector<SegmentScore> all;
  for (const std::string lang : {"de", "fr", "it"}) {
    for (int i = 0; i < 5; ++i) {
      all.push_back(score("x", lang, Dataset::arc, std::to_string(i), 0.9));
      all.push_back(score("y", lang, Dataset::arc, std::to_string(i), 0.5));
      all.push_back(score("z", lang, Dataset::arc, std::to_string(i), 0.1));
    }
  }
  all.push_back(score("x", "de", Dataset::arc, "extra", 0.0));
  const std::vector<std::string> systems{"x", "y", "z"};
  const auto r = rank_from_scores(all, systems, ScoreMode::ref_free, Dataset::arc);
  CHECK(r.blocks == std::vector<std::string>{"de", "fr", "it"});
  CHECK(r.block_sizes == std::vector<std::size_t>{5, 5, 5});
  CHECK(r.avg_ranks == std::vector<double>{1, 2, 3});
  CHECK(kind_of([&] { rank_from_scores(all, systems, ScoreMode::ref_based, std::nullopt); }) ==
        ErrorKind::EmptyOverlap);
}

TEST_CASE("json and csv round trips") {
  std::vector<SegmentScore> cell;
  for (int i = 0; i < 4; ++i) cell.push_back(score("x", "de", Dataset::mmlu, std::to_string(i), 0.2 * i));
  const auto c = cell_summary(cell);
  const auto back = cell_from_json(to_json(c));
  CHECK(back.median == c.median);
  CHECK(back.system == "x");
  CHECK(back.dataset == Dataset::mmlu);
  const std::vector<CellSummary> cells{c};
  const auto csv = cells_csv(cells);
  CHECK(csv.find("0.300000") != std::string::npos);
  CHECK(testing::count_substr(csv, "\n") == 2);

  const auto d = paired_bootstrap_ci(paired({0.3, 0.5, 0.7}, {0.2, 0.5, 0.6}), 100);
  const auto d2 = delta_from_json(to_json(d));
  CHECK(d2.ci_low == d.ci_low);
  CHECK(d2.n == 3);
  const std::vector<DeltaResult> ds{d};
  CHECK(testing::count_substr(deltas_csv(ds), "\n") == 2);
}

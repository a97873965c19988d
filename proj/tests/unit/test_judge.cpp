#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "annotations.hpp"
#include "helpers.hpp"
#include "local_server.hpp"
#include "oracles.hpp"
#include "transaudit/error.hpp"
#include "transaudit/judge.hpp"

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

const ItemKey kItem = key("de", Dataset::arc, Split::test, "1");

MajorityVerdict vote_masks(const std::vector<int>& masks) {
  std::vector<ItemAnnotation> annotations;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    annotations.push_back(testing::annotation_from_mask(kItem, "j" + std::to_string(i), masks[i]));
  }
  return majority_vote(annotations, CategoryMap::builtin(), masks.size());
}

void check_against_oracle(const std::vector<int>& masks) {
  const auto got = vote_masks(masks);
  const auto want = oracle::vote(masks, masks.size());
  REQUIRE(got.excluded == want.excluded);
  CHECK(got.clean == want.clean);
  for (int b = 0; b < 3; ++b) {
    CHECK(got.present[b] == want.present[b]);
    for (int s = 0; s < 2; ++s) CHECK(got.maj[b][s] == want.maj[b][s]);
  }
}

Corpus two_languages() {
  std::vector<BenchmarkItem> targets;
  for (int i = 0; i < 5; ++i) {
    const auto id = std::to_string(i);
    targets.push_back(testing::mc(key(i < 3 ? "de" : "fr", Dataset::arc, Split::test, id), "Frage " + id,
                                  {"x", "y"}, 0));
  }
  return Corpus(targets);
}

Corpus english_for_two_languages() {
  std::vector<BenchmarkItem> en;
  for (int i = 0; i < 5; ++i) {
    const auto id = std::to_string(i);
    en.push_back(testing::mc(key("en", Dataset::arc, Split::test, id), "Question " + id, {"a", "b"}, 0));
  }
  return Corpus(en);
}

}  // namespace

TEST_CASE("strict span parsing") {
  const auto spans = parse_spans_strict(
      R"({"errors":[{"span":"Haus","category":"accuracy/mistranslation","severity":"Major"}]})");
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].span_text == "Haus");
  CHECK(spans[0].severity == Severity::major);
  CHECK(parse_spans_strict(R"({"errors":[]})").empty());
  CHECK(kind_of([] { parse_spans_strict("```json\n{\"errors\":[]}\n```"); }) == ErrorKind::ParseFailed);
  CHECK(kind_of([] { parse_spans_strict(R"({"errors":[{"span":"x","category":"fluency","severity":"huge"}]})"); }) ==
        ErrorKind::ParseFailed);
  CHECK(kind_of([] { parse_spans_strict(R"({"mistakes":[]})"); }) == ErrorKind::ParseFailed);
}

TEST_CASE("response repair extracts one fenced or embedded object") {
  CHECK(parse_response(R"({"errors":[]})").status == ParseStatus::ok);
  const auto fenced = parse_response(
      "Sure.\n```json\n{\"errors\":[{\"span\":\"a}b\",\"category\":\"fluency/grammar\",\"severity\":\"minor\"}]}\n```");
  CHECK(fenced.status == ParseStatus::repaired);
  REQUIRE(fenced.spans.size() == 1);
  CHECK(fenced.spans[0].span_text == "a}b");
  CHECK(parse_response("The answer is {\"errors\": []} as requested.").status == ParseStatus::repaired);
  CHECK(parse_response("no json here").status == ParseStatus::failed);
  CHECK(parse_response("{\"errors\": [").status == ParseStatus::failed);
}

TEST_CASE("category mapping by full name, family and subtype") {
  CHECK(map_category("accuracy/mistranslation") == Bucket::accuracy);
  CHECK(map_category("Accuracy/Omission") == Bucket::accuracy);
  CHECK(map_category("fluency/grammar") == Bucket::fluency);
  CHECK(map_category("style/awkward") == Bucket::fluency);
  CHECK(map_category("locale-convention/date-format") == Bucket::other);
  CHECK(map_category("terminology") == Bucket::other);
  CHECK(map_category("something/unheard-of") == Bucket::other);
  CHECK_FALSE(CategoryMap::builtin().known("something/unheard-of"));

  const auto custom = CategoryMap::from_json({{"A+M", {"meaning"}}, {"F", {"flow"}}, {"O", {"misc"}}});
  CHECK(custom.map("Meaning") == Bucket::accuracy);
  CHECK(custom.map("flow/commas") == Bucket::fluency);
  CHECK(custom.vocabulary() == std::vector<std::string>{"flow", "meaning", "misc"});
}

TEST_CASE("prompts are complete and deterministic") {
  const auto en = testing::mc(key("en", Dataset::arc, Split::test, "9"), "What is water?", {"H2O", "CO2"}, 0);
  const auto de = testing::mc(key("de", Dataset::arc, Split::test, "9"), "Was ist Wasser?", {"H2O", "CO2"}, 0);
  const std::vector<FewShot> none;
  const auto bare = build_prompt(de, &en, none);
  CHECK(bare.find("What is water?") != std::string::npos);
  CHECK(bare.find("Was ist Wasser?") != std::string::npos);
  CHECK(bare.find(std::string(kSeverityRule)) != std::string::npos);
  CHECK(bare.find(std::string(kOutputSchema)) != std::string::npos);
  CHECK(bare.find("- mistranslation") != std::string::npos);
  CHECK(bare.find("- grammar") != std::string::npos);
  CHECK(build_prompt(de, &en, none) == bare);

  const std::vector<FewShot> shots{{"en", "ja", "Good morning", "Konbanwa", R"({"errors":[]})"}};
  const auto with = build_prompt(de, &en, shots);
  CHECK(with.find("Konbanwa") != std::string::npos);
  CHECK(with.size() > bare.size());

  const auto other = testing::mc(key("en", Dataset::arc, Split::test, "10"), "q", {"a"}, 0);
  CHECK(kind_of([&] { build_prompt(de, nullptr, none); }) == ErrorKind::MissingSource);
  CHECK(kind_of([&] { build_prompt(de, &other, none); }) == ErrorKind::MissingSource);
}

TEST_CASE("annotator calls re-ask once and record every raw answer") {
  MockAnnotator fixed("a", [](const std::string&, std::size_t i) {
    return i == 0 ? std::string("not json") : std::string(R"({"errors":[]})");
  });
  const auto a = call_annotator(kItem, "prompt", fixed);
  CHECK(a.parse_status == ParseStatus::ok);
  CHECK(a.raw_attempts.size() == 2);
  CHECK(fixed.calls() == 2);

  auto garbage = MockAnnotator::from_spec("g", "mock:garbage");
  const auto g = call_annotator(kItem, "prompt", *garbage);
  CHECK(g.abstains());
  CHECK(g.raw_attempts.size() == 2);
  CHECK_FALSE(g.raw_response.empty());

  auto prose = MockAnnotator::from_spec("p", "mock:prose");
  CHECK(call_annotator(kItem, "prompt", *prose).parse_status == ParseStatus::repaired);

  auto down = MockAnnotator::from_spec("d", "mock:down");
  const auto d = call_annotator(kItem, "prompt", *down);
  CHECK(d.abstains());
  CHECK_FALSE(d.error.empty());

  MockAnnotator locked("l", [](const std::string&, std::size_t) -> std::string {
    throw Error(ErrorKind::AuthFailure, "no");
  });
  CHECK(kind_of([&] { call_annotator(kItem, "prompt", locked); }) == ErrorKind::AuthFailure);

  const auto round = annotation_from_json(to_json(g));
  CHECK(round.raw_attempts == g.raw_attempts);
  CHECK(round.parse_status == ParseStatus::failed);
}

TEST_CASE("majority threshold") {
  CHECK(majority_threshold(2) == 2);
  CHECK(majority_threshold(3) == 2);
  CHECK(majority_threshold(4) == 3);
  CHECK(majority_threshold(5) == 3);
}

TEST_CASE("hand-enumerated votes") {
  constexpr int am_major = 1 << 0;
  constexpr int am_minor = 1 << 1;
  constexpr int f_minor = 1 << 3;
  auto v = vote_masks({am_major, am_minor, 0});
  CHECK_FALSE(v.majority(Bucket::accuracy, Severity::major));
  CHECK_FALSE(v.majority(Bucket::accuracy, Severity::minor));
  CHECK_FALSE(v.clean);

  v = vote_masks({0, 0, f_minor});
  CHECK(v.clean);
  for (const auto b : kBuckets) CHECK_FALSE(collapse_severity(v)[static_cast<int>(b)]);

  v = vote_masks({am_major | am_minor, am_major | am_minor, 0});
  CHECK(v.majority(Bucket::accuracy, Severity::major));
  CHECK_FALSE(v.majority(Bucket::accuracy, Severity::minor));
  CHECK(collapse_severity(v)[0]);

  v = vote_masks({f_minor, f_minor, -1});
  CHECK(v.majority(Bucket::fluency, Severity::minor));
  CHECK(collapse_severity(v)[1]);

  v = vote_masks({f_minor, -1, -1});
  CHECK(v.excluded);
}

TEST_CASE("single-flag votes match the oracle over all eight cases") {
  for (int m = 0; m < 8; ++m) check_against_oracle({m & 1, (m >> 1) & 1, (m >> 2) & 1});
}

TEST_CASE("single-profile votes match the oracle and ignore order") {
  std::vector<int> profiles{0};
  for (int bit = 0; bit < 6; ++bit) profiles.push_back(1 << bit);
  for (const int a : profiles) {
    for (const int b : profiles) {
      for (const int c : profiles) {
        check_against_oracle({a, b, c});
        std::vector<int> masks{a, b, c};
        const auto ref = vote_masks(masks);
        std::sort(masks.begin(), masks.end());
        do {
          const auto perm = vote_masks(masks);
          CHECK(perm.maj == ref.maj);
          CHECK(perm.clean == ref.clean);
        } while (std::next_permutation(masks.begin(), masks.end()));
      }
    }
  }
}

TEST_CASE("votes reject mixed keys and empty groups") {
  auto a = testing::annotation_from_mask(kItem, "a", 0);
  auto b = testing::annotation_from_mask(key("fr", Dataset::arc, Split::test, "1"), "b", 0);
  const std::vector<ItemAnnotation> mixed{a, b};
  CHECK(kind_of([&] { majority_vote(mixed); }) == ErrorKind::KeyMismatch);
  CHECK(kind_of([] { majority_vote(std::vector<ItemAnnotation>{}); }) == ErrorKind::EmptyGroup);
}

TEST_CASE("rates per thousand and severity shares") {
  std::vector<MajorityVerdict> verdicts;
  for (int i = 0; i < 12; ++i) {
    MajorityVerdict v;
    v.key = key("lv", Dataset::hellaswag, Split::validation, std::to_string(i));
    v.pool_size = 3;
    v.valid = 3;
    if (i < 3) {
      v.raw[0][0] = v.maj[0][0] = true;
      v.present[0] = true;
    } else {
      v.clean = true;
    }
    verdicts.push_back(v);
  }
  MajorityVerdict gone;
  gone.key = key("lv", Dataset::hellaswag, Split::validation, "x");
  gone.excluded = true;
  verdicts.push_back(gone);

  const auto r = error_rates(verdicts);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].n == 12);
  CHECK(r.cells[0].excluded == 1);
  CHECK(r.excluded_total == 1);
  CHECK((*r.cells[0].rate)[0] == doctest::Approx(250.0));
  CHECK((*r.cells[0].rate)[1] == 0.0);
  CHECK(*r.cells[0].clean_rate == doctest::Approx(750.0));
  const auto& am = r.shares[0];
  CHECK(am.bucket == Bucket::accuracy);
  CHECK(*am.major_share == 100.0);
  CHECK(*am.minor_share == 0.0);
  CHECK_FALSE(r.shares[1].major_share.has_value());

  const auto back = rates_from_json(to_json(r));
  CHECK(back.cells[0].n == 12);
  CHECK(*back.cells[0].rate == *r.cells[0].rate);
  CHECK(rates_csv(r).find("lv,hellaswag,12,1,250.000000") != std::string::npos);
}

TEST_CASE("shares always sum to one hundred") {
  for (std::size_t major = 0; major <= 40; ++major) {
    for (std::size_t minor = 0; minor <= 40; ++minor) {
      if (major + minor == 0) continue;
      std::vector<MajorityVerdict> verdicts;
      for (std::size_t i = 0; i < major + minor; ++i) {
        MajorityVerdict v;
        v.key = key("de", Dataset::arc, Split::test, std::to_string(i));
        v.maj[1][i < major ? 0 : 1] = true;
        v.present[1] = true;
        verdicts.push_back(v);
      }
      const auto share = error_rates(verdicts).shares[1];
      CHECK(*share.major_share + *share.minor_share == doctest::Approx(100.0));
      CHECK(std::fabs(*share.major_share - 100.0 * major / (major + minor)) <= 0.05 + 1e-9);
    }
  }
}

TEST_CASE("pool configuration") {
  CHECK(judge_env_name("gpt-4o", "KEY") == "TRANSAUDIT_JUDGE_GPT_4O_KEY");
  CHECK(judge_env_name("a.b", "URL") == "TRANSAUDIT_JUDGE_A_B_URL");
  AnnotatorConfig a;
  a.annotator_id = "a";
  AnnotatorConfig b = a;
  b.annotator_id = "b";
  CHECK_NOTHROW(validate_pool(std::vector<AnnotatorConfig>{a, b}));
  CHECK(kind_of([&] { validate_pool(std::vector<AnnotatorConfig>{a}); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { validate_pool(std::vector<AnnotatorConfig>{a, a}); }) == ErrorKind::ConfigError);
}

TEST_CASE("judging a corpus with three mocks") {
  const auto targets = two_languages();
  const auto english = english_for_two_languages();
  auto a = MockAnnotator::from_spec("a", "mock:seeded");
  auto b = MockAnnotator::from_spec("b", "mock:clean");
  auto c = MockAnnotator::from_spec("c", "mock:prose");
  std::vector<Annotator*> pool{a.get(), b.get(), c.get()};
  const auto run = run_judging(english, targets, pool);
  CHECK(run.annotations.size() == 15);
  CHECK(run.calls == 15);
  CHECK(run.failed_calls == 0);
  CHECK(run.annotations[0].annotator_id == "a");
  CHECK(run.annotations[1].annotator_id == "b");
  const auto verdicts = aggregate(run.annotations, 3);
  CHECK(verdicts.size() == 5);

  std::vector<BenchmarkItem> orphan(targets.begin(), targets.end());
  orphan.push_back(testing::mc(key("de", Dataset::arc, Split::test, "zz"), "q", {"a"}, 0));
  const auto before = a->calls();
  CHECK(kind_of([&] { run_judging(english, Corpus(orphan), pool); }) == ErrorKind::MissingSource);
  CHECK(a->calls() == before);
}

TEST_CASE("an interrupted run resumes without repeating finished pairs") {
  const auto dir = testing::temp_dir("judge");
  const auto targets = two_languages();
  const auto english = english_for_two_languages();
  auto a = MockAnnotator::from_spec("a", "mock:seeded");
  std::atomic<int> budget{4};
  MockAnnotator flaky("b", [&](const std::string&, std::size_t) -> std::string {
    if (budget-- <= 0) throw Error(ErrorKind::AuthFailure, "credentials revoked");
    return R"({"errors":[]})";
  });
  std::vector<Annotator*> pool{a.get(), &flaky};
  JudgeOptions options;
  options.store = dir / "annotations.jsonl";
  CHECK(kind_of([&] { run_judging(english, targets, pool, options); }) == ErrorKind::AuthFailure);
  const auto partial = load_annotations(*options.store).size();
  CHECK(partial >= 4);

  budget = 1000;
  auto a2 = MockAnnotator::from_spec("a", "mock:seeded");
  std::vector<Annotator*> pool2{a2.get(), &flaky};
  const auto run = run_judging(english, targets, pool2, options);
  CHECK(run.resumed == partial);
  CHECK(run.calls == 10 - partial);
  CHECK(run.annotations.size() == 10);

  const auto again = run_judging(english, targets, pool2, options);
  CHECK(again.calls == 0);
  CHECK(again.resumed == 10);
}

TEST_CASE("a down annotator abstains and the vote needs the other two") {
  const auto targets = two_languages();
  const auto english = english_for_two_languages();
  auto a = MockAnnotator::from_spec("a", "mock:clean");
  auto b = MockAnnotator::from_spec("b", "mock:clean");
  auto c = MockAnnotator::from_spec("c", "mock:down");
  std::vector<Annotator*> pool{a.get(), b.get(), c.get()};
  const auto run = run_judging(english, targets, pool);
  CHECK(run.failed_calls == 5);
  for (const auto& v : aggregate(run.annotations, 3)) {
    CHECK(v.valid == 2);
    CHECK(v.clean);
  }

  auto d = MockAnnotator::from_spec("d", "mock:down");
  std::vector<Annotator*> mostly_down{a.get(), c.get(), d.get()};
  JudgeOptions options;
  options.max_failure_fraction = 0.5;
  CHECK(kind_of([&] { run_judging(english, targets, mostly_down, options); }) == ErrorKind::EngineUnavailable);
  options.max_failure_fraction = 0.7;
  CHECK_NOTHROW(run_judging(english, targets, mostly_down, options));
}

TEST_CASE("chat annotator speaks the chat-completions protocol") {
  testing::LocalServer server;
  std::atomic<int> requests{0};
  std::string seen_model;
  std::string seen_auth;
  server.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++requests;
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    seen_model = body.at("model").get<std::string>();
    if (n == 1) {
      res.status = 429;
      return;
    }
    nlohmann::json out;
    out["choices"] = {{{"message", {{"role", "assistant"}, {"content", R"({"errors":[]})"}}}}};
    res.set_content(out.dump(), "application/json");
  });
  server.start();

  AnnotatorConfig config;
  config.annotator_id = "remote";
  config.endpoint = server.url() + "/v1";
  config.model_name = "judge-model";
  config.max_retries = 3;
  http::RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};
  ChatAnnotator annotator(config, "secret", retry);
  CHECK(annotator.complete("hello") == R"({"errors":[]})");
  CHECK(requests.load() == 2);
  CHECK(seen_model == "judge-model");
  CHECK(seen_auth == "Bearer secret");
}

TEST_CASE("chat annotator maps persistent failures to error kinds") {
  testing::LocalServer server;
  server.server().Post("/limited/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 429;
  });
  server.server().Post("/denied/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
  });
  server.start();
  http::RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};
  AnnotatorConfig config;
  config.annotator_id = "x";
  config.max_retries = 2;
  config.endpoint = server.url() + "/limited";
  ChatAnnotator limited(config, "k", retry);
  CHECK(kind_of([&] { limited.complete("p"); }) == ErrorKind::RateLimited);
  config.endpoint = server.url() + "/denied";
  ChatAnnotator denied(config, "k", retry);
  CHECK(kind_of([&] { denied.complete("p"); }) == ErrorKind::AuthFailure);
}

#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "transaudit/error.hpp"

using namespace transaudit;
using testing::key;

namespace {

Corpus parse(const std::string& text, ParseOptions opts = {}) {
  std::istringstream in(text);
  return parse_jsonl_corpus(in, opts);
}

ErrorKind parse_error_kind(const std::string& text, ParseOptions opts = {}) {
  try {
    parse(text, opts);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::ConfigError;
}

}  // namespace

TEST_CASE("upstream ARC line maps onto canonical fields") {
  const auto c = parse(
      R"({"language":"de","dataset":"arc","subset":"challenge","split":"test","id":"Mercury_1",)"
      R"("question":"Was ist?","choices":{"text":["a","b","c","d"],"label":["A","B","C","D"]},"answerKey":"C"})"
      "\n");
  REQUIRE(c.size() == 1);
  const auto& item = c.items().front();
  CHECK(item.key == key("de", Dataset::arc, Split::test, "Mercury_1", "challenge"));
  CHECK(item.question == "Was ist?");
  CHECK(item.choices->size() == 4);
  CHECK(item.answer_index->indices == std::vector<int>{2});
  CHECK(item.extra.at("answer_original") == "C");
  CHECK(item.violations.empty());
}

TEST_CASE("digit-string answers are normalised to zero-based indices") {
  const auto c = parse(
      R"({"language":"fr","dataset":"hellaswag","split":"validation","ind":17,"ctx":"Il","endings":["a","b","c","d"],"label":"3"})"
      "\n");
  REQUIRE(c.size() == 1);
  CHECK(c.items()[0].key.id == "17");
  CHECK(c.items()[0].answer_index->indices == std::vector<int>{3});
}

TEST_CASE("truthfulqa flags become a multi-target index list") {
  const auto c = parse(
      R"({"language":"it","dataset":"truthfulqa","split":"validation","id":"t1","question":"q",)"
      R"("mc1_targets":{"choices":["x","y","z"],"labels":[0,1,1]}})"
      "\n");
  REQUIRE(c.size() == 1);
  CHECK(c.items()[0].answer_index->indices == std::vector<int>{1, 2});
  CHECK(c.items()[0].answer_index->is_list);
}

TEST_CASE("duplicate keys are rejected") {
  const std::string line = R"({"language":"de","dataset":"gsm8k","split":"test","id":"7","question":"q","answer":"4"})";
  CHECK(parse_error_kind(line + "\n" + line + "\n") == ErrorKind::DuplicateKey);
}

TEST_CASE("empty input gives an empty corpus") {
  CHECK(parse("").empty());
  CHECK(parse("\n\n").empty());
}

TEST_CASE("malformed lines report their line number") {
  const std::string good = R"({"language":"de","dataset":"gsm8k","split":"test","id":"1","question":"q","answer":"a"})";
  try {
    parse(good + "\n{not json\n");
    FAIL("expected MalformedLine");
  } catch (const LineError& e) {
    CHECK(e.kind() == ErrorKind::MalformedLine);
    CHECK(e.line_no() == 2);
  }
  CHECK(parse_error_kind(R"({"dataset":"gsm8k","split":"test","id":"1"})") == ErrorKind::MissingKeyField);
  CHECK(parse_error_kind(R"({"language":"de","split":"test","id":"1"})") == ErrorKind::MissingKeyField);
  CHECK(parse_error_kind(R"([1,2])") == ErrorKind::MalformedLine);
}

TEST_CASE("lenient parsing records violations, strict parsing rejects them") {
  const std::string broken = R"({"language":"de","dataset":"mmlu","split":"test","id":"1","question":"q","choices":["a",""],"answer_index":5})";
  const auto c = parse(broken);
  REQUIRE(c.size() == 1);
  CHECK_FALSE(c.items()[0].violations.empty());
  ParseOptions strict;
  strict.strict = true;
  CHECK(parse_error_kind(broken, strict) == ErrorKind::SchemaViolation);
}

TEST_CASE("missing ids are synthesised per (dataset, subset, split)") {
  const auto c = parse(
      R"({"language":"de","dataset":"gsm8k","split":"test","question":"a","answer":"1"})"
      "\n"
      R"({"language":"de","dataset":"gsm8k","split":"train","question":"b","answer":"2"})"
      "\n"
      R"({"language":"de","dataset":"gsm8k","split":"test","question":"c","answer":"3"})"
      "\n");
  REQUIRE(c.size() == 3);
  CHECK(c.items()[0].key.id == "000000");
  CHECK(c.items()[1].key.id == "000000");
  CHECK(c.items()[2].key.id == "000001");
}

TEST_CASE("schemas of the five dataset families") {
  const auto& g = schema_for(Dataset::gsm8k);
  CHECK(g.kind == TaskKind::generative);
  CHECK(g.required_fields == std::vector<std::string>{"question", "answer"});
  CHECK(schema_for(Dataset::mmlu).kind == TaskKind::multiple_choice);
  CHECK(schema_for(Dataset::hellaswag).kind == TaskKind::multiple_choice);
  CHECK(schema_for(Dataset::truthfulqa).kind == TaskKind::multiple_choice);
  CHECK(schema_for(Dataset::arc).translatable_fields == std::vector<std::string>{"question", "choices"});
  for (const auto d : kAllDatasets) {
    const auto& s = schema_for(d);
    CHECK(s.dataset == d);
    for (const auto& f : s.translatable_fields) {
      const bool allowed = f == "question" || f == "choices" || f == "answer";
      CHECK(allowed);
    }
  }
}

TEST_CASE("write then parse reproduces every field") {
  std::vector<BenchmarkItem> items;
  items.push_back(testing::mc(key("el", Dataset::arc, Split::test, "a1", "easy"), "Ποιο είναι;",
                              {"άλφα", "βήτα", "γάμμα"}, 1));
  items.push_back(testing::gen(key("bg", Dataset::gsm8k, Split::train, "g1"), "Колко е?", "Четири"));
  auto third = testing::mc(key("de", Dataset::truthfulqa, Split::validation, "t1"), "q", {"x", "y"}, 0);
  third.answer_index = AnswerIndex{{0, 1}, true};
  third.extra["meta"] = {{"a", 1}};
  third.extra["mc2_targets"] = {{"choices", {"x"}}, {"labels", {1}}};
  items.push_back(third);
  const Corpus original(items);

  std::ostringstream out;
  write_jsonl_corpus(original, out);
  const auto text = out.str();
  CHECK(text.find("Ποιο είναι;") != std::string::npos);
  CHECK(text.find(R"("meta":{"a":1})") != std::string::npos);

  const auto again = parse(text);
  CHECK(again == original);
  std::ostringstream out2;
  write_jsonl_corpus(again, out2);
  CHECK(out2.str() == text);
}

TEST_CASE("index lookup returns the item with that key") {
  std::vector<BenchmarkItem> items;
  for (int i = 0; i < 20; ++i) {
    items.push_back(testing::gen(key(i % 2 ? "de" : "fr", Dataset::gsm8k, Split::test, std::to_string(i)), "q", "a"));
  }
  const Corpus c(items);
  for (const auto& item : c) {
    const auto* found = c.find(item.key);
    REQUIRE(found != nullptr);
    CHECK(found->key == item.key);
  }
  CHECK(c.find(key("it", Dataset::gsm8k, Split::test, "0")) == nullptr);
}

TEST_CASE("file round trip through the filesystem") {
  const auto dir = testing::temp_dir("corpus");
  std::vector<BenchmarkItem> items{testing::gen(key("ro", Dataset::gsm8k, Split::test, "1"), "Câte?", "Patru")};
  const Corpus c(items);
  write_jsonl_corpus(c, dir / "ro.jsonl");
  CHECK(parse_jsonl_corpus(dir / "ro.jsonl") == c);
  CHECK_THROWS_AS(parse_jsonl_corpus(dir / "absent.jsonl"), Error);
}

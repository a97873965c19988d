#include <doctest.h>

#include "fuzz.hpp"
#include "helpers.hpp"
#include "transaudit/error.hpp"
#include "transaudit/fragments.hpp"

using namespace transaudit;
using testing::key;

TEST_CASE("serialization examples") {
  CHECK(serialize_fragments(std::vector<std::string>{"Hello", "World"}) == "Hello<x>SEP</x>World");
  CHECK(serialize_fragments(std::vector<std::string>{"a<b", "c&d"}) == "a&lt;b<x>SEP</x>c&amp;d");
  CHECK(serialize_fragments(std::vector<std::string>{"literal <x>SEP</x> inside"}) ==
        "literal &lt;x&gt;SEP&lt;/x&gt; inside");
  CHECK(serialize_fragments(std::vector<std::string>{"only"}) == "only");
  CHECK(serialize_fragments(std::vector<std::string>{"", ""}) == "<x>SEP</x>");
  CHECK(xml_escape("\"quotes' stay\"") == "\"quotes' stay\"");
}

TEST_CASE("deserialization splits on the marker and unescapes once") {
  CHECK(deserialize_fragments("Hallo<x>SEP</x>Welt", 2) == std::vector<std::string>{"Hallo", "Welt"});
  CHECK(deserialize_fragments("caf&amp;eacute;", 1) == std::vector<std::string>{"caf&eacute;"});
  CHECK(deserialize_fragments("&#38;&#x3C;&quot;&apos;", 1) == std::vector<std::string>{"&<\"'"});
  CHECK_THROWS_AS(deserialize_fragments("a &bogus; b", 1), Error);
  CHECK_THROWS_AS(deserialize_fragments("a & b", 1), Error);
}

TEST_CASE("a dropped marker is a count mismatch") {
  try {
    deserialize_fragments("one<x>SEP</x>two three", 3);
    FAIL("expected FragmentCountMismatch");
  } catch (const FragmentCountMismatch& e) {
    CHECK(e.expected() == 3);
    CHECK(e.got() == 2);
  }
}

TEST_CASE("round trip over random fragment lists") {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto fragments = testing::random_fragments(rng);
    const auto payload = serialize_fragments(fragments);
    REQUIRE(deserialize_fragments(payload, fragments.size()) == fragments);
  }
}

TEST_CASE("field selectors") {
  CHECK(parse_field_selector("question") == FieldSlot{"question", -1});
  CHECK(parse_field_selector("choices[3]") == FieldSlot{"choices", 3});
  CHECK(parse_field_selector("choices[3]").to_string() == "choices[3]");
  CHECK(parse_field_selector("answer").to_string() == "answer");
  CHECK_THROWS_AS(parse_field_selector("choices[x]"), Error);
  CHECK_THROWS_AS(parse_field_selector("explanation"), Error);
}

TEST_CASE("extraction order and counts") {
  const auto item = testing::mc(key("de", Dataset::mmlu, Split::test, "1", "law"), "Q", {"a", "b", "c", "d"}, 0);
  const auto& schema = schema_for(Dataset::mmlu);
  const std::vector<std::string> both = {"choices", "question"};
  const auto list = extract_fragments(item, schema, both);
  CHECK(list.texts == std::vector<std::string>{"Q", "a", "b", "c", "d"});
  CHECK(list.slots.front() == FieldSlot{"question", -1});
  CHECK(list.slots.back() == FieldSlot{"choices", 3});

  const auto g = testing::gen(key("de", Dataset::gsm8k, Split::test, "1"), "Q", "42");
  const std::vector<std::string> answer = {"answer"};
  CHECK(extract_fragments(g, schema_for(Dataset::gsm8k), answer).texts == std::vector<std::string>{"42"});

  auto blank = item;
  blank.question = "";
  const std::vector<std::string> question = {"question"};
  CHECK(extract_fragments(blank, schema, question).texts == std::vector<std::string>{""});

  const std::vector<std::string> bad = {"answer"};
  CHECK_THROWS_AS(extract_fragments(item, schema, bad), Error);
}

#include "transaudit/fragments.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "transaudit/error.hpp"

namespace transaudit {

namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      throw Error(ErrorKind::UnescapeError, fmt::format("unterminated entity at offset {}", i));
    }
    const auto entity = s.substr(i + 1, semi - i - 1);
    if (entity == "amp") {
      out += '&';
    } else if (entity == "lt") {
      out += '<';
    } else if (entity == "gt") {
      out += '>';
    } else if (entity == "quot") {
      out += '"';
    } else if (entity == "apos") {
      out += '\'';
    } else if (entity.size() > 1 && entity[0] == '#') {
      const bool hex = entity[1] == 'x' || entity[1] == 'X';
      const auto digits = entity.substr(hex ? 2 : 1);
      unsigned long cp = 0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
      if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || cp > 0x10FFFF ||
          (cp >= 0xD800 && cp <= 0xDFFF)) {
        throw Error(ErrorKind::UnescapeError, fmt::format("bad character reference '&{};'", entity));
      }
      append_utf8(out, static_cast<char32_t>(cp));
    } else {
      throw Error(ErrorKind::UnescapeError, fmt::format("unknown entity '&{};'", entity));
    }
    i = semi + 1;
  }
  return out;
}

std::string serialize_fragments(std::span<const std::string> fragments) {
  std::string out;
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    if (i > 0) out += kFragmentMarker;
    out += xml_escape(fragments[i]);
  }
  return out;
}

std::vector<std::string> deserialize_fragments(std::string_view payload, std::size_t expected_n) {
  std::vector<std::string> parts;
  if (expected_n == 0 && payload.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = payload.find(kFragmentMarker, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(payload.substr(start));
      break;
    }
    parts.emplace_back(payload.substr(start, pos - start));
    start = pos + kFragmentMarker.size();
  }
  if (parts.size() != expected_n) throw FragmentCountMismatch(expected_n, parts.size());
  for (auto& p : parts) p = xml_unescape(p);
  return parts;
}

std::string FieldSlot::to_string() const {
  return index < 0 ? field : fmt::format("{}[{}]", field, index);
}

FieldSlot parse_field_selector(std::string_view selector) {
  const auto open = selector.find('[');
  const auto name = selector.substr(0, open);
  if (name != "question" && name != "choices" && name != "answer") {
    throw Error(ErrorKind::UnknownField, std::string(selector));
  }
  if (open == std::string_view::npos) return {std::string(selector), -1};
  if (name != "choices" || selector.back() != ']') throw Error(ErrorKind::UnknownField, std::string(selector));
  const auto digits = selector.substr(open + 1, selector.size() - open - 2);
  int index = -1;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || index < 0) {
    throw Error(ErrorKind::UnknownField, std::string(selector));
  }
  return {std::string(selector.substr(0, open)), index};
}

FragmentList extract_fragments(const BenchmarkItem& item, const TaskSchema& schema,
                               std::span<const std::string> fields) {
  bool want_question = false;
  bool want_answer = false;
  bool all_choices = false;
  std::set<int> choice_indices;
  for (const auto& f : fields) {
    const auto slot = parse_field_selector(f);
    if (std::find(schema.translatable_fields.begin(), schema.translatable_fields.end(), slot.field) ==
        schema.translatable_fields.end()) {
      throw Error(ErrorKind::UnknownField,
                  fmt::format("'{}' is not translatable for {}", f, to_string(schema.dataset)));
    }
    if (slot.field == "question") {
      if (slot.index >= 0) throw Error(ErrorKind::UnknownField, f);
      want_question = true;
    } else if (slot.field == "answer") {
      if (slot.index >= 0) throw Error(ErrorKind::UnknownField, f);
      want_answer = true;
    } else if (slot.field == "choices") {
      if (slot.index < 0) {
        all_choices = true;
      } else {
        choice_indices.insert(slot.index);
      }
    }
  }

  FragmentList out;
  if (want_question) {
    out.texts.push_back(item.question.value_or(""));
    out.slots.push_back({"question", -1});
  }
  const std::size_t n_choices = item.choices ? item.choices->size() : 0;
  if (all_choices) {
    for (std::size_t i = 0; i < n_choices; ++i) choice_indices.insert(static_cast<int>(i));
  }
  for (const int i : choice_indices) {
    const auto idx = static_cast<std::size_t>(i);
    if (idx >= n_choices) {
      throw Error(ErrorKind::UnknownField, fmt::format("choices[{}] but the item has {} choices", i, n_choices));
    }
    out.texts.push_back((*item.choices)[idx]);
    out.slots.push_back({"choices", i});
  }
  if (want_answer) {
    out.texts.push_back(item.answer.value_or(""));
    out.slots.push_back({"answer", -1});
  }
  return out;
}

}  // namespace transaudit

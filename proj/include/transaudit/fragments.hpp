#pragma once

// Fragment serialization for engine round-trips.
//
// An item's translatable texts are XML-escaped (& < > only) and joined with
// the literal marker <x>SEP</x>. The engine is told to leave <x> alone, so
// the response splits back on the same marker. Escaping guarantees the
// marker never occurs inside a fragment.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "transaudit/corpus.hpp"

namespace transaudit {

inline constexpr std::string_view kFragmentMarker = "<x>SEP</x>";
inline constexpr std::string_view kIgnoreTag = "x";

std::string xml_escape(std::string_view s);
/// Single-pass unescape of the five predefined entities and numeric
/// references. Any other '&' sequence raises UnescapeError.
std::string xml_unescape(std::string_view s);

std::string serialize_fragments(std::span<const std::string> fragments);
/// Splits on the marker and unescapes each part. Raises FragmentCountMismatch
/// when the part count differs from `expected_n`.
std::vector<std::string> deserialize_fragments(std::string_view payload, std::size_t expected_n);

/// Where a fragment is written back: `choices[2]` has index 2, scalar fields -1.
struct FieldSlot {
  std::string field;
  int index = -1;

  [[nodiscard]] std::string to_string() const;
  auto operator<=>(const FieldSlot&) const = default;
  bool operator==(const FieldSlot&) const = default;
};

/// Parses "question", "choices", "choices[3]" or "answer".
FieldSlot parse_field_selector(std::string_view selector);

struct FragmentList {
  std::vector<std::string> texts;
  std::vector<FieldSlot> slots;  // parallel to texts
};

/// Extracts texts for the selected fields in fixed order: question, choices by
/// index, answer. Selectors must name translatable fields of `schema`
/// (UnknownField otherwise). Absent fields yield empty fragments.
FragmentList extract_fragments(const BenchmarkItem& item, const TaskSchema& schema,
                               std::span<const std::string> fields);

}  // namespace transaudit

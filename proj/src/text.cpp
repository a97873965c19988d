#include "transaudit/text.hpp"

namespace transaudit::text {

bool is_unicode_space(char32_t cp) noexcept {
  switch (cp) {
    case 0x0009: case 0x000A: case 0x000B: case 0x000C: case 0x000D:
    case 0x0020: case 0x0085: case 0x00A0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

char32_t next_code_point(std::string_view s, std::size_t& pos) noexcept {
  constexpr char32_t kReplacement = 0xFFFD;
  const auto lead = static_cast<unsigned char>(s[pos]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + len > s.size()) {
    ++pos;
    return kReplacement;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += len;
  return cp;
}

std::string_view trim_left(std::string_view s) noexcept {
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = pos;
    if (!is_unicode_space(next_code_point(s, next))) break;
    pos = next;
  }
  return s.substr(pos);
}

std::string_view trim_right(std::string_view s) noexcept {
  // Walk forward, remembering the end of the last non-space code point.
  std::size_t pos = 0;
  std::size_t end = 0;
  while (pos < s.size()) {
    const char32_t cp = next_code_point(s, pos);
    if (!is_unicode_space(cp)) end = pos;
  }
  return s.substr(0, end);
}

std::string_view trim(std::string_view s) noexcept { return trim_right(trim_left(s)); }

bool is_blank(std::string_view s) noexcept { return trim_left(s).empty(); }

std::size_t count_words(std::string_view s) noexcept {
  std::size_t words = 0;
  bool in_word = false;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const bool space = is_unicode_space(next_code_point(s, pos));
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

std::size_t common_prefix_length(std::string_view a, std::string_view b) noexcept {
  std::size_t n = 0;
  const std::size_t limit = a.size() < b.size() ? a.size() : b.size();
  while (n < limit && a[n] == b[n]) ++n;
  // Do not end inside a multi-byte sequence.
  if (n < a.size() || n < b.size()) {
    while (n > 0) {
      const auto ca = n < a.size() ? static_cast<unsigned char>(a[n]) : 0;
      const auto cb = n < b.size() ? static_cast<unsigned char>(b[n]) : 0;
      if ((ca & 0xC0) != 0x80 && (cb & 0xC0) != 0x80) break;
      --n;
    }
  }
  return n;
}

}  // namespace transaudit::text

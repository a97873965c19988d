#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace transaudit::text {

/// True for code points with the Unicode White_Space property.
bool is_unicode_space(char32_t cp) noexcept;

/// Decodes one UTF-8 code point starting at `pos` and advances `pos`.
/// Invalid sequences decode as U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos) noexcept;

/// Removes leading and trailing Unicode whitespace.
std::string_view trim(std::string_view s) noexcept;
std::string_view trim_left(std::string_view s) noexcept;
std::string_view trim_right(std::string_view s) noexcept;

/// Empty after trimming Unicode whitespace.
bool is_blank(std::string_view s) noexcept;

/// Number of maximal runs of non-whitespace code points.
std::size_t count_words(std::string_view s) noexcept;

/// Length of the longest common prefix, cut back to a code point boundary.
std::size_t common_prefix_length(std::string_view a, std::string_view b) noexcept;

}  // namespace transaudit::text

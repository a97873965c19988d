#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace transaudit {

enum class ErrorKind {
  // corpus
  MalformedLine,
  DuplicateKey,
  MissingKeyField,
  SchemaViolation,
  IoFailure,
  // audit
  SchemaMismatch,
  DomainError,
  // repair
  UnknownField,
  FragmentCountMismatch,
  UnescapeError,
  EngineUnavailable,
  AuthFailure,
  LineageError,
  WriteConflict,
  PrefixStripFailure,
  // scores
  ScoreOutOfRange,
  DuplicateScore,
  InsufficientData,
  LengthMismatch,
  DegenerateInput,
  DimensionMismatch,
  UnsupportedK,
  ModeMismatch,
  EmptyOverlap,
  // judge
  MissingSource,
  RateLimited,
  ParseFailed,
  KeyMismatch,
  EmptyGroup,
  // report / config
  EmptyInput,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure the library reports. The kind is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised with the 1-based line number of the offending record.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line_no, const std::string& message)
      : Error(kind, "line " + std::to_string(line_no) + ": " + message), line_no_(line_no) {}

  [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class FragmentCountMismatch : public Error {
 public:
  FragmentCountMismatch(std::size_t expected, std::size_t got)
      : Error(ErrorKind::FragmentCountMismatch,
              "expected " + std::to_string(expected) + " fragments, got " + std::to_string(got)),
        expected_(expected),
        got_(got) {}

  [[nodiscard]] std::size_t expected() const noexcept { return expected_; }
  [[nodiscard]] std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

}  // namespace transaudit

#include "transaudit/error.hpp"

namespace transaudit {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::MissingKeyField: return "MissingKeyField";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::UnknownField: return "UnknownField";
    case ErrorKind::FragmentCountMismatch: return "FragmentCountMismatch";
    case ErrorKind::UnescapeError: return "UnescapeError";
    case ErrorKind::EngineUnavailable: return "EngineUnavailable";
    case ErrorKind::AuthFailure: return "AuthFailure";
    case ErrorKind::LineageError: return "LineageError";
    case ErrorKind::WriteConflict: return "WriteConflict";
    case ErrorKind::PrefixStripFailure: return "PrefixStripFailure";
    case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorKind::DuplicateScore: return "DuplicateScore";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnsupportedK: return "UnsupportedK";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::EmptyOverlap: return "EmptyOverlap";
    case ErrorKind::MissingSource: return "MissingSource";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::ParseFailed: return "ParseFailed";
    case ErrorKind::KeyMismatch: return "KeyMismatch";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace transaudit

#include "marketpulse/error.hpp"

namespace marketpulse {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::InvalidPair: return "InvalidPair";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateTail: return "DegenerateTail";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::CrawlFailed: return "CrawlFailed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace marketpulse

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace marketpulse {

enum class ErrorCode {
  InvalidInput,
  InvalidWindow,
  InvalidPair,
  InsufficientData,
  DegenerateTail,
  MissingField,
  MalformedDocument,
  CrawlFailed,
  ConfigError,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All recoverable failures raised by the library carry one of the codes above.
/// "Undefined" results (e.g. Yule Q with a zero denominator) are not errors;
/// those come back as empty optionals.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace marketpulse

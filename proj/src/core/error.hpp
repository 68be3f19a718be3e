#pragma once

#include <stdexcept>
#include <string>

namespace nmpnerf {

// Stable error classes. The numeric values double as CLI exit codes for the
// first four and as C API status codes for all of them.
enum class ErrorCode : int {
  Invariant = 1,
  Config = 2,
  Io = 3,
  Parse = 4,
  Domain = 5,
  Argument = 6,
  Internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCode::Parse, what) {}
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what) : Error(ErrorCode::Invariant, what) {}
};

}  // namespace nmpnerf

#pragma once

#include <stdexcept>
#include <string>

namespace tailext {

/// Base class for every error raised by the library. The `exit_code` is what
/// the command-line tool returns when the error escapes to `main`.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code = 1)
      : std::runtime_error(what), exit_code_(exit_code) {}
  [[nodiscard]] int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Invalid configuration or precondition violation on user-supplied values.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// Malformed, missing or inconsistent data (manifests, labels, dimensions).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// Failure talking to an external service (LLM endpoint, embedding endpoint).
class ServiceError : public Error {
 public:
  explicit ServiceError(const std::string& what) : Error(what, 4) {}
};

/// The service answered, but the answer could not be parsed after retries.
class ParseError : public ServiceError {
 public:
  explicit ParseError(const std::string& what) : ServiceError(what) {}
};

}  // namespace tailext

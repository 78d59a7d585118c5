#pragma once

#include <stdexcept>
#include <string>

namespace riskrank {

/// Base class for every error raised by the library. `kind()` is a short
/// stable tag used by the CLI in its machine-parsable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error("parse", what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension-mismatch", what) {}
};

class CorruptFile : public Error {
 public:
  explicit CorruptFile(const std::string& what) : Error("corrupt-file", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

/// Failure talking to a remote embedding provider.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, bool retryable)
      : Error(retryable ? "remote-retryable" : "remote", what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& what) : Error("leakage", what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

}  // namespace riskrank

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace draco {

enum class ErrorCategory {
  InvalidInput,
  Numeric,
  Config,
  Io,
  Causality,
  Geometry,
  CorruptMessage,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::InvalidInput: return "invalid-input";
    case ErrorCategory::Numeric: return "numerical-overflow";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Causality: return "causality-violation";
    case ErrorCategory::Geometry: return "invalid-geometry";
    case ErrorCategory::CorruptMessage: return "corrupt-message";
  }
  return "unknown";
}

// Process exit code for a failure category (CLI contract).
inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Numeric: return 3;
    case ErrorCategory::Io: return 4;
    default: return 1;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(ErrorCategory::InvalidInput, what) {}
};

class NumericalOverflow : public Error {
 public:
  NumericalOverflow(const std::string& what, std::size_t batch_index)
      : Error(ErrorCategory::Numeric,
              what + " (batch " + std::to_string(batch_index) + ")"),
        batch_index_(batch_index) {}

  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t batch_index_;
};

class CausalityViolation : public Error {
 public:
  explicit CausalityViolation(const std::string& what) : Error(ErrorCategory::Causality, what) {}
};

class InvalidGeometry : public Error {
 public:
  explicit InvalidGeometry(const std::string& what) : Error(ErrorCategory::Geometry, what) {}
};

class CorruptMessage : public Error {
 public:
  explicit CorruptMessage(const std::string& what) : Error(ErrorCategory::CorruptMessage, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorCategory::Config,
              source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

}  // namespace draco

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iad {

// Caller broke a documented precondition (bad shape, out-of-range index, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or inconsistent configuration detected before any compute starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric quantity that must be finite was not (loss, gradient, logit).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text input failed to parse. Line and column are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : std::runtime_error(format(message, line, column)),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& message, std::size_t line,
                            std::size_t column) {
    return "line " + std::to_string(line) + ", column " +
           std::to_string(column) + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

// A recorded data file (trajectory log, manifest) could not be ingested.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& file, std::size_t line,
                 const std::string& message)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
        file_(file),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace iad

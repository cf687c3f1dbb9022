#pragma once

#include <stdexcept>
#include <string>

namespace evpred {

// Exit-code mapping used by the CLI: 2 format/argument, 3 integrity, 4 divergence/check failure.

/// Malformed input file or text. Carries the 1-based line number when known (0 otherwise).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checkpoint/vocabulary mismatch or inconsistent paraphrase inventory.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinity reached the optimizer.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evpred

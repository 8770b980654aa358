#ifndef ADEDGEDROP_ERROR_HPP
#define ADEDGEDROP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adedgedrop {

/// Violated precondition or postcondition of a library call.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Operand shapes do not agree.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// A tensor operation produced NaN or Inf.
class NumericError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Malformed configuration key or value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace adedgedrop

#endif  // ADEDGEDROP_ERROR_HPP

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcnn {

/// Tensor shapes that do not fit an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed text input (label trees, schedules, configs). Carries the
/// 1-based line number of the offending line, or 0 when not line-bound.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error(line == 0 ? message
                                     : "line " + std::to_string(line) + ": " + message),
        line_(line),
        message_(message) {}

  std::size_t line() const noexcept { return line_; }
  /// Message without the line prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

/// Malformed binary input (dataset files, checkpoints). Carries the byte
/// offset at which decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t offset, const std::string& message)
      : std::runtime_error(message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace bcnn

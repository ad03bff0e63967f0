#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmtn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf reached an op boundary or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint bytes are malformed; offset is where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class VersionError : public Error {
 public:
  VersionError(unsigned found, unsigned expected)
      : Error("checkpoint format version " + std::to_string(found) +
              " does not match supported version " + std::to_string(expected)),
        found_(found),
        expected_(expected) {}
  unsigned found() const { return found_; }
  unsigned expected() const { return expected_; }

 private:
  unsigned found_;
  unsigned expected_;
};

}  // namespace dmtn

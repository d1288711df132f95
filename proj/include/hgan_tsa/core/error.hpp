#pragma once

#include <stdexcept>
#include <string>

namespace hgan_tsa {

// Broad failure classes. The CLI maps each class to its own exit code.
enum class ErrorKind {
  kConfig,
  kIo,
  kShape,
  kData,
  kNumeric,
  kRange,
  kState,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

/// Raised when a text input cannot be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::kIo, source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// The scenario grid could not produce enough events of one class.
class ImbalanceError : public DataError {
 public:
  ImbalanceError(const std::string& deficient_class, const std::string& what)
      : DataError(what), deficient_class_(deficient_class) {}

  const std::string& deficient_class() const noexcept { return deficient_class_; }

 private:
  std::string deficient_class_;
};

class DegenerateNetworkError : public Error {
 public:
  explicit DegenerateNetworkError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorKind::kRange, what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorKind::kState, what) {}
};

}  // namespace hgan_tsa

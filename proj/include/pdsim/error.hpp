#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::size_t column, const std::string& message)
      : Error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        file_(std::move(file)),
        line_(line),
        column_(column) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A series that must be rescaled to a positive total sums to zero.
class ZeroAggregate : public Error {
 public:
  using Error::Error;
};

class NonConvergent : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class DegenerateRatio : public Error {
 public:
  using Error::Error;
};

class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ConstantSeries : public Error {
 public:
  using Error::Error;
};

class MissingYear : public Error {
 public:
  using Error::Error;
};

class UnknownDistrict : public Error {
 public:
  explicit UnknownDistrict(int id)
      : Error("unknown district id " + std::to_string(id)), id_(id) {}
  int id() const noexcept { return id_; }

 private:
  int id_;
};

/// Input that violates a type invariant (bad parameter, malformed scenario).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace pdsim

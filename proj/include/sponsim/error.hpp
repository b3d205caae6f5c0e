#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sponsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Event log

class OutOfOrder : public Error {
 public:
  using Error::Error;
};

class DanglingClick : public Error {
 public:
  using Error::Error;
};

/// A second click on an impression that was already clicked.
class DuplicateClick : public Error {
 public:
  using Error::Error;
};

/// Event time at or beyond the log horizon.
class OutsideHorizon : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  /// 1-based line number of the offending record.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Auction

class MissingCtr : public Error {
 public:
  using Error::Error;
};

class UnknownMover : public Error {
 public:
  using Error::Error;
};

// Estimators

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

// Traffic

class HorizonExceeded : public Error {
 public:
  using Error::Error;
};

// Bench

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  /// Dotted path of the offending field, e.g. "advertiser.A.bid_cents".
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ShapeViolation : public Error {
 public:
  ShapeViolation(std::string column, int tick, const std::string& what)
      : Error(column + " at t=" + std::to_string(tick) + ": " + what),
        column_(std::move(column)),
        tick_(tick) {}

  const std::string& column() const noexcept { return column_; }
  int tick() const noexcept { return tick_; }

 private:
  std::string column_;
  int tick_;
};

}  // namespace sponsim

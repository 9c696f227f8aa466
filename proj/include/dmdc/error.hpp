#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmdc {

enum class ErrorKind {
  InvalidArgument,
  RankDeficient,
  NumericalFailure,
  AssumptionViolated,
  IllConditioned,
  ParseError,
  Io,
};

const char* to_string(ErrorKind kind);

/// Base of every error thrown by the library. `kind()` lets callers (the CLI
/// in particular) map failures onto exit codes without RTTI ladders.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::InvalidArgument, what) {}
};

/// Raised when a truncation order keeps a singular value below the rank
/// tolerance. `max_order()` is the largest order that would have been accepted.
class RankDeficient : public Error {
 public:
  RankDeficient(const std::string& what, std::size_t max_order)
      : Error(ErrorKind::RankDeficient, what), max_order_(max_order) {}

  std::size_t max_order() const noexcept { return max_order_; }

 private:
  std::size_t max_order_;
};

/// Non-finite values or a failed factorization. `step()` is the time index at
/// which it happened, or npos when not tied to a trajectory.
class NumericalFailure : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit NumericalFailure(const std::string& what, std::size_t step = npos)
      : Error(ErrorKind::NumericalFailure, what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class AssumptionViolated : public Error {
 public:
  explicit AssumptionViolated(const std::string& what)
      : Error(ErrorKind::AssumptionViolated, what) {}
};

class IllConditioned : public Error {
 public:
  explicit IllConditioned(const std::string& what)
      : Error(ErrorKind::IllConditioned, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(ErrorKind::ParseError, what), row_(row), column_(column) {}

  // 1-based; column is 0 when the whole row is at fault.
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace dmdc

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace triq {

/// Base of every error raised by the library. The CLI maps NumericError to
/// exit code 3 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its allowed domain (pool size, sigma, fraction...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A value outside a documented range (MOS outside [1,5]).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed container or image contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a forward value, gradient or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API precondition (non-scalar loss, invalid distribution).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Token sequence longer than the positional-embedding table allows.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace triq

#pragma once

#include <stdexcept>
#include <string>

namespace stfuse {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate or out-of-range arguments (zero-norm vector, score outside
/// its documented range, camera index past the declared count).
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& what) : Error(what) {}
};

/// A dataset or model violates a structural invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

/// Malformed input file. The message always carries a location
/// (line number or byte offset).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

}  // namespace stfuse

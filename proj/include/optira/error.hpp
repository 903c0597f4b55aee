#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace optira {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed infix expression. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// An atom was evaluated outside its domain (log of a non-positive value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A model violates a structural invariant (undeclared variable, bad bounds, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// The convexifier could not produce a convex surrogate.
class ConvexificationError : public Error {
 public:
  using Error::Error;
};

/// The internal solver refused its input (non-convex or integer model).
class SolverRejection : public Error {
 public:
  using Error::Error;
};

/// A solve exceeded its wall-clock deadline.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

/// LLM backend failures: transport, missing key, exhausted mock script.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A backend reply did not satisfy the expected response schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input: corpus files, problem files, config.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace optira

#pragma once

#include <stdexcept>
#include <string>

namespace lpp {

/// Base class for every error raised by the library. Operations throw; the CLI
/// maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes or documents: tensor streams, manifests, JSONL, CSV.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpp

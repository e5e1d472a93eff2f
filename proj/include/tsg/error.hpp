#pragma once

#include <stdexcept>
#include <string>

namespace tsg {

// Base for every error this library raises. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or precondition violation on an in-memory value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent on-disk bundle. The message carries file:line.
class DataError : public Error {
 public:
  DataError(const std::string& file, long line, const std::string& what)
      : Error(line > 0 ? file + ":" + std::to_string(line) + ": " + what
                       : file + ": " + what) {}
};

}  // namespace tsg

#pragma once

#include <stdexcept>
#include <string>

namespace voteflow {

// Base of every error the library throws. The three subclasses map onto the
// CLI exit codes (2 validation, 3 execution abort, 4 storage).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ExecutionError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

}  // namespace voteflow

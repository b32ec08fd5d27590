#pragma once

#include <stdexcept>
#include <string>

namespace apgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_input"; }
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "not_positive_definite"; }
};

/// A cached factorization no longer matches the kernel hyperparameters.
class StaleCache : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "stale_cache"; }
};

}  // namespace apgp

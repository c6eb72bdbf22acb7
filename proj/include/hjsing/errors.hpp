#pragma once

#include <stdexcept>
#include <string>

namespace hjsing {

// Raised when an operation is called outside its domain (bad arguments,
// violated hypotheses such as a critical starting point).
class PreconditionError : public std::invalid_argument {
 public:
  explicit PreconditionError(const std::string& what)
      : std::invalid_argument(what) {}
};

class OutOfRegionError : public PreconditionError {
 public:
  explicit OutOfRegionError(const std::string& what)
      : PreconditionError(what) {}
};

// Raised when an iterative method fails; carries the last residual seen.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace hjsing

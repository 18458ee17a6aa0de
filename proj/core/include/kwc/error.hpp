#ifndef KWC_ERROR_HPP
#define KWC_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace kwc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// A field does not match the mesh it is applied to.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// tau >= tau_star: the eta-step objective is not guaranteed to be convex.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

class InvalidInitialData : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class InvalidPairing : public Error {
 public:
  using Error::Error;
};

/// An iterative solve stopped before reaching its tolerance. The best iterate
/// found so far and its residual travel with the exception.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best_iterate, double residual)
      : Error(what), best_iterate_(std::move(best_iterate)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_iterate_;
  double residual_;
};

}  // namespace kwc

#endif  // KWC_ERROR_HPP

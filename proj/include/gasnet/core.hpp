#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gasnet {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

/// Base class of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (network, scenario, control file).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a modelling precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver.
class SolverError : public Error {
 public:
  enum class Kind {
    VacuumGuard,
    SteadyStateBreach,
    ContractionFailure,
    Precondition,
    LinearBreakdown,
    HorizonLimited,
  };

  SolverError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace gasnet

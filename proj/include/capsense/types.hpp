#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace capsense {

using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration (bad shape parameters, resolutions,
/// epsilon lists, unknown names). The CLI maps this family to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested at a chart-degenerate parameter point.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Normal perturbation violates the immersion safety margin |eps*h*tau| < 1/2.
class PerturbationError : public Error {
 public:
  using Error::Error;
};

/// Off-surface evaluation point closer to the surface than the quadrature
/// can resolve. Callers must refine or use an on-surface path.
class NearFieldError : public Error {
 public:
  using Error::Error;
};

/// A density or operator was applied across mismatched quadratures.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Dense solve rejected because the estimated condition number crossed the
/// hard threshold.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double cond)
      : Error(what), condition_estimate(cond) {}
  double condition_estimate;
};

class EigensolveError : public Error {
 public:
  using Error::Error;
};

/// Sets the worker thread count for assembly and dense algebra (OpenMP and
/// Eigen). Thread count never changes results beyond roundoff; see README.
void set_thread_count(int n);
int thread_count();

}  // namespace capsense

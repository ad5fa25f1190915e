#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

namespace shapeqmc {

using Point2 = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;

/// Scalar function of a point in the plane (source terms, exact solutions).
using ScalarField = std::function<double(const Point2&)>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside its admissible range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The domain map has (numerically) nonpositive Jacobian determinant.
class DegenerateMapError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested at a point where the map is not differentiable.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A point lies outside the meshed region.
class OutsideDomainError : public Error {
 public:
  using Error::Error;
};

/// A linear solve did not reach its residual tolerance.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (generating vector, dataset, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapeqmc

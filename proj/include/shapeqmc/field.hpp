#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "shapeqmc/common.hpp"

namespace shapeqmc {

/// Point y of the truncated parameter box [-1/2, 1/2]^s.
class ParameterVector {
 public:
  ParameterVector() = default;
  /// Throws InvalidArgument if any entry leaves [-1/2, 1/2].
  explicit ParameterVector(std::vector<double> values);

  /// All entries equal to `value`.
  static ParameterVector constant(int s, double value);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int j) const { return values_[static_cast<std::size_t>(j)]; }
  std::span<const double> values() const { return values_; }

  /// Pads with zeros up to dimension `s` (s >= size()).
  ParameterVector extended(int s) const;

 private:
  std::vector<double> values_;
};

/// Smoothness profile of the perturbation: derivative bounds C (|nu|!)^beta b^nu
/// with b_j = b_scale * j^(-b_decay) and b in l^p.
struct GevreyProfile {
  double beta = 2.0;
  double b_scale = 1.0;
  double b_decay = 2.1;
  double p = 0.49;
  double C = 1.0;
  /// Derivative-growth profile of the source term; carried for the constants
  /// ledger only.
  std::array<double, 2> rho{1.0, 1.0};

  double b(int j) const;  // j is 1-based
  void validate() const;

  struct Summability {
    double partial_sum;  // sum_{j<=cutoff} b_j^p
    double tail_bound;   // integral bound on the remainder
    int cutoff;
  };
  /// Numerical l^p check; throws InvalidArgument if b_decay * p <= 1.
  Summability summability(int cutoff = 100000) const;
};

enum class FieldKind { PaperRadial, Identity, UserSupplied };

/// Shape parameters of the radial field a(x, y) x.
struct RadialParams {
  double amplitude = 1.2;
  int frequency = 3;
  double decay = 2.1;
};

/// Callbacks defining a user-supplied map V(x, y) and its spatial Jacobian.
struct UserMap {
  std::function<Point2(const Point2&, std::span<const double>)> map;
  std::function<Matrix2(const Point2&, std::span<const double>)> jacobian;
};

/// exp(-1 / (1/2 + t)) with the continuous extension 0 at t = -1/2.
double mode_activation(double t);

/// Polar angle atan2(x2, x1), with the convention theta(0, 0) = 0.
double polar_angle(const Point2& x);

/// Parametric domain map V(., y) of the reference disk.
///
/// A paper-radial field carries `modes` series terms
///   a(x, y) = 1 + amplitude * sum_j sin(frequency j theta) j^(-decay) exp(-1/(1/2 + y_j))
/// of which the first `dimension()` are driven by the parameter vector and the
/// remaining ones are frozen at y_j = 0 (the zero-padded truncation).
class PerturbationField {
 public:
  static PerturbationField paper_radial(int modes, RadialParams params = {}, GevreyProfile profile = {});
  static PerturbationField identity(int s, GevreyProfile profile = {});
  static PerturbationField user_supplied(int s, UserMap map, GevreyProfile profile = {});

  FieldKind kind() const { return kind_; }
  int dimension() const { return s_; }
  int modes() const { return modes_; }
  const RadialParams& radial() const { return radial_; }
  const GevreyProfile& profile() const { return profile_; }

  /// Coefficient amplitude * j^(-decay) of mode j (1-based).
  double mode_coefficient(int j) const;

  double radial_profile(const Point2& x, const ParameterVector& y) const;
  Point2 evaluate_map(const Point2& x, const ParameterVector& y) const;
  /// Throws DomainError at the origin for a paper-radial field with active modes.
  Matrix2 jacobian(const Point2& x, const ParameterVector& y) const;

  /// Keeps the first s parameters, freezing the others at 0. Requires 1 <= s.
  /// For a paper-radial field s may not exceed modes().
  PerturbationField truncate(int s) const;

  /// Activation values g_j for all modes: g(y_j) for j <= s, g(0) beyond.
  std::vector<double> activations(const ParameterVector& y) const;

 private:
  void check_parameter(const ParameterVector& y) const;
  std::pair<double, double> radial_terms(const Point2& x, const ParameterVector& y) const;

  FieldKind kind_ = FieldKind::Identity;
  int s_ = 1;
  int modes_ = 0;
  RadialParams radial_;
  GevreyProfile profile_;
  UserMap user_;
};

/// A(J) = (J^T J)^{-1} det J. Throws DegenerateMapError if det J is not positive.
Matrix2 diffusion_matrix(const Matrix2& J);
Matrix2 diffusion_matrix(const PerturbationField& field, const Point2& x, const ParameterVector& y);

/// f_ref(x, y) = f(V(x, y)) det J(x, y).
double pullback_source(const PerturbationField& field, const ScalarField& f, const Point2& x,
                       const ParameterVector& y);

/// Empirical (min, max) singular value of J over uniformly sampled x in the
/// disk and y in the parameter box.
std::pair<double, double> singular_value_bounds(const PerturbationField& field, int n_samples,
                                                std::uint64_t seed);

/// Source term 10 sin(x1 x2) - 5 cos(x1 + x2)^2.
ScalarField paper_source();
ScalarField constant_source(double value);

/// Map data at a fixed set of points, refreshed per parameter value.
///
/// For paper-radial fields the angular mode tables are computed once, so a
/// refresh costs O(points * s); other kinds fall back to the pointwise calls.
class FieldSampler {
 public:
  FieldSampler(const PerturbationField& field, std::vector<Point2> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Point2>& points() const { return points_; }

  /// Writes V(x_q, y) into `map`; if `jacobian` is non-empty also J(x_q, y).
  void evaluate(const ParameterVector& y, std::span<Point2> map, std::span<Matrix2> jacobian) const;

 private:
  PerturbationField field_;
  std::vector<Point2> points_;
  // Radial tables, row-major [point][active mode].
  std::vector<double> sin_table_;
  std::vector<double> dsin_table_;
  std::vector<double> frozen_a_;
  std::vector<double> frozen_da_;
  std::vector<Point2> grad_theta_;
  std::vector<std::uint8_t> at_origin_;
};

}  // namespace shapeqmc

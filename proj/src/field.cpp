#include "shapeqmc/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "shapeqmc/rng.hpp"

namespace shapeqmc {

ParameterVector::ParameterVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t j = 0; j < values_.size(); ++j) {
    const double v = values_[j];
    if (!(v >= -0.5 && v <= 0.5)) {
      throw InvalidArgument("parameter entry " + std::to_string(j) + " = " + std::to_string(v) +
                            " outside [-1/2, 1/2]");
    }
  }
}

ParameterVector ParameterVector::constant(int s, double value) {
  return ParameterVector(std::vector<double>(static_cast<std::size_t>(std::max(s, 0)), value));
}

ParameterVector ParameterVector::extended(int s) const {
  if (s < size()) throw InvalidArgument("extended: target dimension smaller than current");
  std::vector<double> padded = values_;
  padded.resize(static_cast<std::size_t>(s), 0.0);
  return ParameterVector(std::move(padded));
}

double GevreyProfile::b(int j) const {
  return b_scale * std::pow(static_cast<double>(j), -b_decay);
}

void GevreyProfile::validate() const {
  if (!(beta >= 1.0)) throw InvalidArgument("Gevrey exponent beta must be >= 1");
  if (!(b_scale >= 0.0) || !(b_decay >= 0.0))
    throw InvalidArgument("b must be a nonincreasing nonnegative sequence");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("summability exponent p must lie in (0, 1)");
  if (!(C >= 1.0)) throw InvalidArgument("Gevrey constant C must be >= 1");
}

GevreyProfile::Summability GevreyProfile::summability(int cutoff) const {
  validate();
  const double exponent = b_decay * p;
  if (exponent <= 1.0) {
    throw InvalidArgument("b is not in l^p: b_decay * p = " + std::to_string(exponent) + " <= 1");
  }
  double partial = 0.0;
  for (int j = cutoff; j >= 1; --j) partial += std::pow(b(j), p);
  const double tail = std::pow(b_scale, p) * std::pow(static_cast<double>(cutoff), 1.0 - exponent) /
                      (exponent - 1.0);
  return {partial, tail, cutoff};
}

double mode_activation(double t) {
  if (t <= -0.5) return 0.0;
  return std::exp(-1.0 / (0.5 + t));
}

double polar_angle(const Point2& x) {
  if (x[0] == 0.0 && x[1] == 0.0) return 0.0;
  return std::atan2(x[1], x[0]);
}

PerturbationField PerturbationField::paper_radial(int modes, RadialParams params, GevreyProfile profile) {
  if (modes < 1) throw InvalidArgument("paper-radial field needs at least one mode");
  profile.validate();
  PerturbationField f;
  f.kind_ = FieldKind::PaperRadial;
  f.s_ = modes;
  f.modes_ = modes;
  f.radial_ = params;
  f.profile_ = profile;
  return f;
}

PerturbationField PerturbationField::identity(int s, GevreyProfile profile) {
  if (s < 1) throw InvalidArgument("field dimension must be >= 1");
  PerturbationField f;
  f.kind_ = FieldKind::Identity;
  f.s_ = s;
  f.profile_ = profile;
  return f;
}

PerturbationField PerturbationField::user_supplied(int s, UserMap map, GevreyProfile profile) {
  if (s < 1) throw InvalidArgument("field dimension must be >= 1");
  if (!map.map || !map.jacobian) throw InvalidArgument("user-supplied field needs map and jacobian");
  PerturbationField f;
  f.kind_ = FieldKind::UserSupplied;
  f.s_ = s;
  f.profile_ = profile;
  f.user_ = std::move(map);
  return f;
}

double PerturbationField::mode_coefficient(int j) const {
  return radial_.amplitude * std::pow(static_cast<double>(j), -radial_.decay);
}

void PerturbationField::check_parameter(const ParameterVector& y) const {
  if (y.size() != s_) {
    throw InvalidArgument("parameter vector has length " + std::to_string(y.size()) +
                          ", field dimension is " + std::to_string(s_));
  }
}

std::vector<double> PerturbationField::activations(const ParameterVector& y) const {
  check_parameter(y);
  std::vector<double> g(static_cast<std::size_t>(modes_));
  for (int j = 0; j < modes_; ++j) g[static_cast<std::size_t>(j)] = mode_activation(j < s_ ? y[j] : 0.0);
  return g;
}

double PerturbationField::radial_profile(const Point2& x, const ParameterVector& y) const {
  check_parameter(y);
  switch (kind_) {
    case FieldKind::Identity:
      return 1.0;
    case FieldKind::UserSupplied:
      throw InvalidArgument("radial_profile is only defined for radial fields");
    case FieldKind::PaperRadial:
      break;
  }
  return radial_terms(x, y).first;
}

// (a, da/dtheta) of the radial field; cos(w theta - pi/2) is evaluated as sin(w theta).
std::pair<double, double> PerturbationField::radial_terms(const Point2& x, const ParameterVector& y) const {
  const double theta = polar_angle(x);
  const auto g = activations(y);
  double a_sum = 0.0;
  double da_sum = 0.0;
  for (int j = 1; j <= modes_; ++j) {
    const double w = radial_.frequency * j;
    const double c = std::pow(static_cast<double>(j), -radial_.decay) * g[static_cast<std::size_t>(j - 1)];
    a_sum += std::sin(w * theta) * c;
    da_sum += w * std::cos(w * theta) * c;
  }
  return {1.0 + radial_.amplitude * a_sum, radial_.amplitude * da_sum};
}

Point2 PerturbationField::evaluate_map(const Point2& x, const ParameterVector& y) const {
  check_parameter(y);
  switch (kind_) {
    case FieldKind::Identity:
      return x;
    case FieldKind::UserSupplied:
      return user_.map(x, y.values());
    case FieldKind::PaperRadial:
      break;
  }
  return radial_profile(x, y) * x;
}

Matrix2 PerturbationField::jacobian(const Point2& x, const ParameterVector& y) const {
  check_parameter(y);
  switch (kind_) {
    case FieldKind::Identity:
      return Matrix2::Identity();
    case FieldKind::UserSupplied:
      return user_.jacobian(x, y.values());
    case FieldKind::PaperRadial:
      break;
  }
  const double r2 = x.squaredNorm();
  if (r2 == 0.0 && radial_.frequency != 0) {
    throw DomainError("jacobian of the radial field is undefined at the origin");
  }
  const auto [a, da_dtheta] = radial_terms(x, y);
  const Point2 grad_a = da_dtheta * Point2(-x[1], x[0]) / r2;
  return a * Matrix2::Identity() + x * grad_a.transpose();
}

PerturbationField PerturbationField::truncate(int s) const {
  if (s < 1) throw InvalidArgument("truncation dimension must be >= 1");
  if (kind_ == FieldKind::PaperRadial && s > modes_) {
    throw InvalidArgument("truncation dimension " + std::to_string(s) + " exceeds the " +
                          std::to_string(modes_) + " modes of the field");
  }
  PerturbationField f = *this;
  f.s_ = s;
  return f;
}

Matrix2 diffusion_matrix(const Matrix2& J) {
  const double det = J.determinant();
  if (!(det > 1e3 * std::numeric_limits<double>::epsilon())) {
    throw DegenerateMapError("det J = " + std::to_string(det) + " is not positive");
  }
  // (J^T J)^{-1} det J = adj(J) adj(J)^T / det J; the product is symmetric bit for bit.
  Matrix2 adj;
  adj << J(1, 1), -J(0, 1), -J(1, 0), J(0, 0);
  return (adj * adj.transpose()) / det;
}

Matrix2 diffusion_matrix(const PerturbationField& field, const Point2& x, const ParameterVector& y) {
  return diffusion_matrix(field.jacobian(x, y));
}

double pullback_source(const PerturbationField& field, const ScalarField& f, const Point2& x,
                       const ParameterVector& y) {
  const double det = field.jacobian(x, y).determinant();
  if (!(det > 0.0)) throw DegenerateMapError("det J = " + std::to_string(det) + " is not positive");
  return f(field.evaluate_map(x, y)) * det;
}

std::pair<double, double> singular_value_bounds(const PerturbationField& field, int n_samples,
                                                std::uint64_t seed) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  auto gen = make_stream(seed, 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<double> y(static_cast<std::size_t>(field.dimension()));
  for (int i = 0; i < n_samples; ++i) {
    double r = 0.0;
    double phi = 0.0;
    do {
      r = std::sqrt(uniform01(gen));
      phi = 2.0 * std::numbers::pi * uniform01(gen);
    } while (r == 0.0);
    for (auto& v : y) v = uniform01(gen) - 0.5;
    const Point2 x(r * std::cos(phi), r * std::sin(phi));
    const Matrix2 J = field.jacobian(x, ParameterVector(y));
    if (!(J.determinant() > 0.0)) {
      throw DegenerateMapError("sampled Jacobian with det J <= 0");
    }
    const Eigen::Vector2d sv = Eigen::JacobiSVD<Matrix2>(J).singularValues();
    lo = std::min(lo, sv[1]);
    hi = std::max(hi, sv[0]);
  }
  return {lo, hi};
}

ScalarField paper_source() {
  return [](const Point2& x) {
    const double c = std::cos(x[0] + x[1]);
    return 10.0 * std::sin(x[0] * x[1]) - 5.0 * c * c;
  };
}

ScalarField constant_source(double value) {
  return [value](const Point2&) { return value; };
}

FieldSampler::FieldSampler(const PerturbationField& field, std::vector<Point2> points)
    : field_(field), points_(std::move(points)) {
  if (field_.kind() != FieldKind::PaperRadial) return;
  const std::size_t q = points_.size();
  const int s = field_.dimension();
  const int m = field_.modes();
  const double freq = field_.radial().frequency;
  const double g0 = mode_activation(0.0);
  sin_table_.assign(q * static_cast<std::size_t>(s), 0.0);
  dsin_table_.assign(q * static_cast<std::size_t>(s), 0.0);
  frozen_a_.assign(q, 0.0);
  frozen_da_.assign(q, 0.0);
  grad_theta_.assign(q, Point2::Zero());
  at_origin_.assign(q, 0);
  for (std::size_t i = 0; i < q; ++i) {
    const Point2& x = points_[i];
    const double theta = polar_angle(x);
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) {
      at_origin_[i] = 1;
    } else {
      grad_theta_[i] = Point2(-x[1], x[0]) / r2;
    }
    for (int j = 1; j <= m; ++j) {
      const double w = freq * j;
      const double c = field_.mode_coefficient(j);
      const double sv = c * std::sin(w * theta);
      const double dv = c * w * std::cos(w * theta);
      if (j <= s) {
        sin_table_[i * static_cast<std::size_t>(s) + static_cast<std::size_t>(j - 1)] = sv;
        dsin_table_[i * static_cast<std::size_t>(s) + static_cast<std::size_t>(j - 1)] = dv;
      } else {
        frozen_a_[i] += g0 * sv;
        frozen_da_[i] += g0 * dv;
      }
    }
  }
}

void FieldSampler::evaluate(const ParameterVector& y, std::span<Point2> map, std::span<Matrix2> jacobian) const {
  const std::size_t q = points_.size();
  const bool want_j = !jacobian.empty();
  if (map.size() != q || (want_j && jacobian.size() != q)) {
    throw InvalidArgument("FieldSampler::evaluate: output size mismatch");
  }
  if (field_.kind() != FieldKind::PaperRadial) {
    for (std::size_t i = 0; i < q; ++i) {
      map[i] = field_.evaluate_map(points_[i], y);
      if (want_j) jacobian[i] = field_.jacobian(points_[i], y);
    }
    return;
  }
  if (y.size() != field_.dimension()) throw InvalidArgument("FieldSampler::evaluate: dimension mismatch");
  const auto s = static_cast<std::size_t>(field_.dimension());
  std::vector<double> g(s);
  for (std::size_t j = 0; j < s; ++j) g[j] = mode_activation(y[static_cast<int>(j)]);
  for (std::size_t i = 0; i < q; ++i) {
    const double* st = sin_table_.data() + i * s;
    double a_acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) a_acc += g[j] * st[j];
    const double a = 1.0 + (a_acc + frozen_a_[i]);
    map[i] = a * points_[i];
    if (want_j) {
      if (at_origin_[i]) throw DomainError("jacobian of the radial field is undefined at the origin");
      const double* dt = dsin_table_.data() + i * s;
      double da_acc = 0.0;
      for (std::size_t j = 0; j < s; ++j) da_acc += g[j] * dt[j];
      const Point2 grad_a = (da_acc + frozen_da_[i]) * grad_theta_[i];
      jacobian[i] = a * Matrix2::Identity() + points_[i] * grad_a.transpose();
    }
  }
}

}  // namespace shapeqmc

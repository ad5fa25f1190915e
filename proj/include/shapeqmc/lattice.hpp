#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shapeqmc/field.hpp"

namespace shapeqmc {

/// Riemann zeta for x > 1: partial sum plus Euler-Maclaurin tail.
double riemann_zeta(double x);

/// 2 zeta(2 lambda) / (2 pi^2)^lambda.
double zeta_factor(double lambda);

/// Lambda branch selection for POD weights given summability p, Gevrey
/// exponent beta and slack alpha. Result lies in (1/2, 1].
double choose_lambda(double p, double beta, double alpha);

/// Bound constants of the regularity estimates, reported alongside runs.
struct ConstantsLedger {
  double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0, c5 = 1.0, c6 = 1.0;
  double sigma_min = 1.0, sigma_max = 1.0;
  double tau_min = 1.0;          // lower bound on the smallest eigenvalue of Gamma, at most 1
  double poincare = 0.0;         // Poincare constant of the unit disk, 1 / j_{0,1}
  double domain_area = 0.0;      // |D_ref| = pi

  struct Inputs {
    GevreyProfile profile;
    double sigma_min = 1.0;
    double sigma_max = 1.0;
    double tau_min = 1.0;
    int observations = 5;        // k
    int spatial_dimension = 2;   // d
  };
  static ConstantsLedger compute(const Inputs& in);
};

/// Product-and-order-dependent weights gamma_u = Gamma_|u| prod_{j in u} beta_j.
/// Order factors are stored as logarithms.
class PodWeights {
 public:
  PodWeights(std::vector<double> log_order_factors, std::vector<double> coordinate_factors, double lambda,
             double alpha, double beta_gevrey);

  /// Product weights (Gamma_l = 1).
  static PodWeights product(std::vector<double> coordinate_factors);

  int max_dimension() const { return static_cast<int>(coordinate_factors_.size()); }
  int max_order() const { return static_cast<int>(log_order_factors_.size()) - 1; }
  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  double beta_gevrey() const { return beta_gevrey_; }

  double log_order_factor(int l) const { return log_order_factors_.at(static_cast<std::size_t>(l)); }
  /// Throws Error if Gamma_l overflows a double.
  double order_factor(int l) const;
  double coordinate_factor(int j) const { return coordinate_factors_.at(static_cast<std::size_t>(j - 1)); }
  const std::vector<double>& coordinate_factors() const { return coordinate_factors_; }

  /// gamma_u for a set of 1-based coordinate indices.
  double gamma(std::span<const int> u) const;

 private:
  std::vector<double> log_order_factors_;
  std::vector<double> coordinate_factors_;
  double lambda_;
  double alpha_;
  double beta_gevrey_;
};

/// POD weights minimizing the error-bound constant for the likelihood-weighted
/// integrand: Gamma_l = ((l+1)!)^(2 beta/(1+lambda)),
/// beta_j = (c6 b_j / sqrt(zeta_factor(lambda)))^(2/(1+lambda)), c6 -> 1 unless
/// include_c6.
PodWeights pod_weights(const GevreyProfile& profile, double lambda, int s_max, bool include_c6,
                       const ConstantsLedger& ledger, double alpha = 0.05);

/// Bernoulli kernel B_2(t) = t^2 - t + 1/6.
double bernoulli2(double t);

/// Shift-averaged worst-case error e(z) of the rank-1 lattice rule in the
/// weighted unanchored Sobolev space, via the POD order recursion.
double shift_averaged_wce(std::span<const std::int64_t> z, std::int64_t n, const PodWeights& weights);

/// Squared errors e^2 of the candidates z_d in [1, n-1] within this relative
/// distance of the minimum count as ties; the smallest candidate wins.
inline constexpr double kCbcTieTolerance = 1e-12;

/// Component-by-component construction of a generating vector.
std::vector<std::int64_t> cbc_construct(std::int64_t n, int s, const PodWeights& weights);

/// (1/(n-1) sum_{u != {}} gamma_u^lambda zeta_factor(lambda)^|u|)^(1/(2 lambda))
/// over the first max_dimension() coordinates.
double error_bound(const PodWeights& weights, std::int64_t n, double lambda);

/// Randomly shifted rank-1 lattice rule on [-1/2, 1/2]^s.
class LatticeRule {
 public:
  /// Draws R shifts from the counter-keyed stream (seed, r).
  LatticeRule(std::int64_t n, std::vector<std::int64_t> z, int shifts, std::uint64_t seed);
  /// Explicit shifts (each of length s, entries in [0, 1)).
  LatticeRule(std::int64_t n, std::vector<std::int64_t> z, std::vector<std::vector<double>> shifts);

  std::int64_t n() const { return n_; }
  int dimension() const { return static_cast<int>(z_.size()); }
  int shift_count() const { return static_cast<int>(shifts_.size()); }
  const std::vector<std::int64_t>& generating_vector() const { return z_; }
  const std::vector<double>& shift(int r) const { return shifts_.at(static_cast<std::size_t>(r)); }
  std::uint64_t seed() const { return seed_; }

  /// Node {l z / n + Delta_r} - 1/2, written into `out` (size s).
  void point(std::int64_t l, int shift_index, std::span<double> out) const;
  /// All n nodes of one shift, node-major.
  std::vector<std::vector<double>> generate_points(int shift_index) const;

 private:
  std::int64_t n_;
  std::vector<std::int64_t> z_;
  std::vector<std::vector<double>> shifts_;
  std::uint64_t seed_ = 0;
};

/// Shift vector for (seed, r): s uniform draws in [0, 1).
std::vector<double> random_shift(std::uint64_t seed, int r, int s);

/// Reads a generating vector: one integer per line, or `index value` pairs.
/// Blank lines and `#` comments are skipped. Returns the first s values.
std::vector<std::int64_t> load_generating_vector(const std::string& path, int s);
/// Writes the two-column form `j z_j` (1-based j).
void save_generating_vector(const std::string& path, std::span<const std::int64_t> z);

bool is_prime(std::int64_t m);
/// Smallest prime >= m (m >= 2).
std::int64_t next_prime(std::int64_t m);

}  // namespace shapeqmc

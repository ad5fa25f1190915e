#include "shapeqmc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "shapeqmc/rng.hpp"

namespace shapeqmc {

double riemann_zeta(double x) {
  if (!(x > 1.0)) throw InvalidArgument("riemann_zeta requires x > 1");
  // Direct sum below N, Euler-Maclaurin remainder through B_6 beyond. The
  // truncation error is O(N^(-x-7)), far below double precision.
  constexpr int N = 10000;
  double sum = 0.0;
  for (int k = N - 1; k >= 1; --k) sum += std::pow(static_cast<double>(k), -x);
  const double nd = N;
  const double nx = std::pow(nd, -x);
  double tail = nd * nx / (x - 1.0) + 0.5 * nx;
  tail += x / 12.0 * nx / nd;
  tail -= x * (x + 1.0) * (x + 2.0) / 720.0 * nx / (nd * nd * nd);
  tail += x * (x + 1.0) * (x + 2.0) * (x + 3.0) * (x + 4.0) / 30240.0 * nx / std::pow(nd, 5);
  return sum + tail;
}

double zeta_factor(double lambda) {
  return 2.0 * riemann_zeta(2.0 * lambda) / std::pow(2.0 * std::numbers::pi * std::numbers::pi, lambda);
}

double choose_lambda(double p, double beta, double alpha) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("choose_lambda: p must lie in (0, 1)");
  if (!(beta >= 1.0)) throw InvalidArgument("choose_lambda: beta must be >= 1");
  if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("choose_lambda: alpha must lie in (0, 1/2)");
  const double inv_beta = 1.0 / beta;
  if (p > 2.0 / 3.0 && p < inv_beta) return p / (2.0 - p);
  if (p <= std::min(2.0 / 3.0, inv_beta) && p != inv_beta) return 1.0 / (2.0 - 2.0 * alpha);
  throw InvalidArgument("choose_lambda: p = " + std::to_string(p) + " is outside both admissible regimes for beta = " +
                        std::to_string(beta) + " (need p <= min(2/3, 1/beta), p != 1/beta, or 2/3 < p < 1/beta)");
}

ConstantsLedger ConstantsLedger::compute(const Inputs& in) {
  in.profile.validate();
  if (!(in.sigma_min > 0.0 && in.sigma_min <= 1.0 && in.sigma_max >= 1.0))
    throw InvalidArgument("constants ledger: need 0 < sigma_min <= 1 <= sigma_max");
  if (!(in.tau_min > 0.0)) throw InvalidArgument("constants ledger: tau_min must be positive");
  ConstantsLedger c;
  c.sigma_min = in.sigma_min;
  c.sigma_max = in.sigma_max;
  c.tau_min = std::min(in.tau_min, 1.0);
  c.poincare = 1.0 / 2.404825557695773;  // first zero of J_0
  c.domain_area = std::numbers::pi;
  const double d = in.spatial_dimension;
  const double beta = in.profile.beta;
  const double C = in.profile.C;
  const double ratio_d = std::pow(in.sigma_max / in.sigma_min, d);
  const double dd_fact_beta = std::pow(std::tgamma(d * d + 1.0), beta);
  c.c1 = 1.0 + ratio_d * in.sigma_max * in.sigma_max * c.poincare * std::sqrt(c.domain_area) * C /
                   std::pow(2.0, beta);
  const double rho_norm = std::pow(std::pow(in.profile.rho[0], 1.0 / beta) + std::pow(in.profile.rho[1], 1.0 / beta),
                                   beta);
  const double t1 = ratio_d / (in.sigma_min * in.sigma_min * dd_fact_beta);
  const double t2 = 2.0 * std::pow(std::pow(2.0, beta) * C / in.sigma_min, 3.0);
  const double t3 = (c.c1 - 1.0) / (in.sigma_max * in.sigma_max * dd_fact_beta);
  const double t4 = std::pow(std::pow(2.0, beta) * C, 2.0) / in.sigma_min * std::max(1.0, rho_norm);
  const double tmax = std::max({t1, t2, t3, t4});
  c.c2 = tmax * tmax * dd_fact_beta * std::pow(2.0, beta * (d * d + 1.0) + 1.0);
  c.c3 = std::pow(3.47, in.observations) / std::pow(2.0, beta);
  c.c4 = std::pow(2.0, beta) * c.c1 * c.c2 / std::sqrt(c.tau_min);
  c.c5 = C * c.c3;
  c.c6 = std::max(1.0, c.c4);
  return c;
}

PodWeights::PodWeights(std::vector<double> log_order_factors, std::vector<double> coordinate_factors, double lambda,
                       double alpha, double beta_gevrey)
    : log_order_factors_(std::move(log_order_factors)),
      coordinate_factors_(std::move(coordinate_factors)),
      lambda_(lambda),
      alpha_(alpha),
      beta_gevrey_(beta_gevrey) {
  if (log_order_factors_.size() < coordinate_factors_.size() + 1)
    throw InvalidArgument("PodWeights: need order factors for orders 0..s_max");
  if (log_order_factors_[0] != 0.0) throw InvalidArgument("PodWeights: Gamma_0 must equal 1");
  for (double v : log_order_factors_)
    if (!std::isfinite(v)) throw InvalidArgument("PodWeights: order factor is not finite");
  for (double v : coordinate_factors_)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("PodWeights: coordinate factors must be positive");
}

PodWeights PodWeights::product(std::vector<double> coordinate_factors) {
  std::vector<double> log_gamma(coordinate_factors.size() + 1, 0.0);
  return PodWeights(std::move(log_gamma), std::move(coordinate_factors), 1.0, 0.0, 1.0);
}

double PodWeights::order_factor(int l) const {
  const double v = std::exp(log_order_factor(l));
  if (!std::isfinite(v)) throw Error("Gamma_" + std::to_string(l) + " exceeds the double range");
  return v;
}

double PodWeights::gamma(std::span<const int> u) const {
  double log_g = log_order_factor(static_cast<int>(u.size()));
  for (int j : u) log_g += std::log(coordinate_factor(j));
  return std::exp(log_g);
}

PodWeights pod_weights(const GevreyProfile& profile, double lambda, int s_max, bool include_c6,
                       const ConstantsLedger& ledger, double alpha) {
  profile.validate();
  if (!(lambda > 0.5 && lambda <= 1.0)) throw InvalidArgument("pod_weights: lambda must lie in (1/2, 1]");
  if (s_max < 1) throw InvalidArgument("pod_weights: s_max must be >= 1");
  const double exponent = 2.0 / (1.0 + lambda);
  std::vector<double> log_order(static_cast<std::size_t>(s_max) + 1);
  for (int l = 0; l <= s_max; ++l) {
    // log(((l+1)!)^beta)^(2/(1+lambda)); lgamma(2) = 0 keeps Gamma_0 = 1 exact.
    log_order[static_cast<std::size_t>(l)] = exponent * profile.beta * std::lgamma(l + 2.0);
  }
  const double c6 = include_c6 ? ledger.c6 : 1.0;
  const double denom = std::sqrt(zeta_factor(lambda));
  std::vector<double> coord(static_cast<std::size_t>(s_max));
  for (int j = 1; j <= s_max; ++j) coord[static_cast<std::size_t>(j - 1)] = std::pow(c6 * profile.b(j) / denom, exponent);
  return PodWeights(std::move(log_order), std::move(coord), lambda, alpha, profile.beta);
}

double bernoulli2(double t) { return t * t - t + 1.0 / 6.0; }

namespace {

// Neumaier-compensated sum. Kernel sums over the lattice nodes cancel down to
// O(1/n) of their terms, so plain summation would break the exact symmetry ties.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// B_2(k/n) for k = 0..n-1, symmetric in k <-> n-k bit for bit.
std::vector<double> kernel_table(std::int64_t n) {
  std::vector<double> table(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t kk = std::min(k, n - k);
    table[static_cast<std::size_t>(k)] = bernoulli2(static_cast<double>(kk) / static_cast<double>(n));
  }
  return table;
}

void check_rule_args(std::int64_t n, std::span<const std::int64_t> z, const PodWeights& weights) {
  if (n < 2 || !is_prime(n)) throw InvalidArgument("lattice size n must be a prime >= 2");
  if (static_cast<int>(z.size()) > weights.max_dimension())
    throw InvalidArgument("generating vector longer than the weight sequence");
  for (auto zj : z)
    if (zj < 1 || zj >= n) throw InvalidArgument("generating vector entries must lie in [1, n-1]");
}

// Ratios Gamma_k / Gamma_{k-1} for k = 1..s.
std::vector<double> order_ratios(const PodWeights& weights, int s) {
  std::vector<double> r(static_cast<std::size_t>(s) + 1, 0.0);
  for (int k = 1; k <= s; ++k)
    r[static_cast<std::size_t>(k)] = std::exp(weights.log_order_factor(k) - weights.log_order_factor(k - 1));
  return r;
}

}  // namespace

double shift_averaged_wce(std::span<const std::int64_t> z, std::int64_t n, const PodWeights& weights) {
  check_rule_args(n, z, weights);
  const int s = static_cast<int>(z.size());
  const auto table = kernel_table(n);
  const auto ratio = order_ratios(weights, s);
  std::vector<double> q(static_cast<std::size_t>(s) + 1);
  std::vector<double> per_node(static_cast<std::size_t>(n));
  for (std::int64_t l = 0; l < n; ++l) {
    // q_k = Gamma_k * (sum over |u| = k of prod_{j in u} beta_j omega_j(l)).
    std::fill(q.begin(), q.end(), 0.0);
    q[0] = 1.0;
    for (int d = 1; d <= s; ++d) {
      const auto idx = static_cast<std::size_t>((l * z[static_cast<std::size_t>(d - 1)]) % n);
      const double factor = weights.coordinate_factor(d) * table[idx];
      for (int k = d; k >= 1; --k)
        q[static_cast<std::size_t>(k)] += ratio[static_cast<std::size_t>(k)] * factor * q[static_cast<std::size_t>(k - 1)];
    }
    double acc = 0.0;
    for (int k = 1; k <= s; ++k) acc += q[static_cast<std::size_t>(k)];
    per_node[static_cast<std::size_t>(l)] = acc;
  }
  CompensatedSum total;
  for (double v : per_node) total.add(v);
  const double e2 = total.value() / static_cast<double>(n);
  return std::sqrt(std::max(e2, 0.0));
}

std::vector<std::int64_t> cbc_construct(std::int64_t n, int s, const PodWeights& weights) {
  if (n < 2 || !is_prime(n)) throw InvalidArgument("lattice size n must be a prime >= 2");
  if (s < 1 || s > weights.max_dimension()) throw InvalidArgument("cbc_construct: s outside [1, weight dimension]");
  const auto nn = static_cast<std::size_t>(n);
  const auto stride = static_cast<std::size_t>(s) + 1;
  const auto table = kernel_table(n);
  const auto ratio = order_ratios(weights, s);
  // q[l * stride + k]: Gamma_k-scaled order-k sums at node l for the current prefix.
  std::vector<double> q(nn * stride, 0.0);
  for (std::size_t l = 0; l < nn; ++l) q[l * stride] = 1.0;
  std::vector<double> a(nn);
  std::vector<std::int64_t> z;
  z.reserve(static_cast<std::size_t>(s));
  double e2_prev = 0.0;
  // Candidates above n/2 mirror those below (B_2 symmetry) and never win the tie-break.
  const std::int64_t last_candidate = std::max<std::int64_t>(1, (n - 1) / 2);
  std::vector<double> e2(static_cast<std::size_t>(last_candidate) + 1);
  for (int d = 1; d <= s; ++d) {
    for (std::size_t l = 0; l < nn; ++l) {
      double acc = 0.0;
      for (int k = 1; k <= d; ++k)
        acc += ratio[static_cast<std::size_t>(k)] * q[l * stride + static_cast<std::size_t>(k - 1)];
      a[l] = acc;
    }
    const double beta_d = weights.coordinate_factor(d);
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t cand = 1; cand <= last_candidate; ++cand) {
      CompensatedSum sum;
      std::int64_t idx = 0;
      for (std::size_t l = 0; l < nn; ++l) {
        sum.add(table[static_cast<std::size_t>(idx)] * a[l]);
        idx += cand;
        if (idx >= n) idx -= n;
      }
      const double value = e2_prev + beta_d * sum.value() / static_cast<double>(n);
      e2[static_cast<std::size_t>(cand)] = value;
      best = std::min(best, value);
    }
    std::int64_t chosen = 1;
    for (std::int64_t cand = 1; cand <= last_candidate; ++cand) {
      if (e2[static_cast<std::size_t>(cand)] <= best + kCbcTieTolerance * std::abs(best)) {
        chosen = cand;
        break;
      }
    }
    z.push_back(chosen);
    e2_prev = e2[static_cast<std::size_t>(chosen)];
    std::int64_t idx = 0;
    for (std::size_t l = 0; l < nn; ++l) {
      const double factor = beta_d * table[static_cast<std::size_t>(idx)];
      double* ql = q.data() + l * stride;
      for (int k = d; k >= 1; --k) ql[k] += ratio[static_cast<std::size_t>(k)] * factor * ql[k - 1];
      idx += chosen;
      if (idx >= n) idx -= n;
    }
  }
  return z;
}

double error_bound(const PodWeights& weights, std::int64_t n, double lambda) {
  if (n < 2) throw InvalidArgument("error_bound: n must be >= 2");
  if (!(lambda > 0.5 && lambda <= 1.0)) throw InvalidArgument("error_bound: lambda must lie in (1/2, 1]");
  const int s = weights.max_dimension();
  const double zf = zeta_factor(lambda);
  const auto ratio = order_ratios(weights, s);
  // t_k = Gamma_k^lambda zf^k e_k(beta^lambda) over the coordinates seen so far.
  std::vector<double> t(static_cast<std::size_t>(s) + 1, 0.0);
  t[0] = 1.0;
  for (int d = 1; d <= s; ++d) {
    const double factor = std::pow(weights.coordinate_factor(d), lambda) * zf;
    for (int k = d; k >= 1; --k)
      t[static_cast<std::size_t>(k)] +=
          std::pow(ratio[static_cast<std::size_t>(k)], lambda) * factor * t[static_cast<std::size_t>(k - 1)];
  }
  double sum = 0.0;
  for (int k = s; k >= 1; --k) sum += t[static_cast<std::size_t>(k)];
  if (!std::isfinite(sum)) throw Error("error_bound: weighted sum diverges at s = " + std::to_string(s));
  return std::pow(sum / static_cast<double>(n - 1), 1.0 / (2.0 * lambda));
}

std::vector<double> random_shift(std::uint64_t seed, int r, int s) {
  auto gen = make_stream(seed, static_cast<std::uint64_t>(r));
  std::vector<double> shift(static_cast<std::size_t>(s));
  for (auto& v : shift) v = uniform01(gen);
  return shift;
}

LatticeRule::LatticeRule(std::int64_t n, std::vector<std::int64_t> z, int shifts, std::uint64_t seed)
    : n_(n), z_(std::move(z)), seed_(seed) {
  if (n_ < 1) throw InvalidArgument("lattice size must be >= 1");
  if (shifts < 1) throw InvalidArgument("need at least one shift");
  for (int r = 0; r < shifts; ++r) shifts_.push_back(random_shift(seed, r, dimension()));
}

LatticeRule::LatticeRule(std::int64_t n, std::vector<std::int64_t> z, std::vector<std::vector<double>> shifts)
    : n_(n), z_(std::move(z)), shifts_(std::move(shifts)) {
  if (n_ < 1) throw InvalidArgument("lattice size must be >= 1");
  if (shifts_.empty()) throw InvalidArgument("need at least one shift");
  for (auto& shift : shifts_) {
    if (static_cast<int>(shift.size()) != dimension()) throw InvalidArgument("shift dimension mismatch");
    for (auto& v : shift) v -= std::floor(v);
  }
}

void LatticeRule::point(std::int64_t l, int shift_index, std::span<double> out) const {
  if (shift_index < 0 || shift_index >= shift_count()) throw InvalidArgument("shift index out of range");
  if (out.size() != z_.size()) throw InvalidArgument("LatticeRule::point: output size mismatch");
  const auto& delta = shifts_[static_cast<std::size_t>(shift_index)];
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t j = 0; j < z_.size(); ++j) {
    const std::int64_t k = (l % n_) * (z_[j] % n_) % n_;
    double t = static_cast<double>(k) * inv_n + delta[j];
    while (t >= 1.0) t -= 1.0;
    out[j] = t - 0.5;
  }
}

std::vector<std::vector<double>> LatticeRule::generate_points(int shift_index) const {
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(n_), std::vector<double>(z_.size()));
  for (std::int64_t l = 0; l < n_; ++l) point(l, shift_index, pts[static_cast<std::size_t>(l)]);
  return pts;
}

std::vector<std::int64_t> load_generating_vector(const std::string& path, int s) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open generating-vector file " + path);
  std::vector<std::int64_t> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::vector<std::string> fields;
    for (std::string tok; tokens >> tok;) fields.push_back(tok);
    if (fields.empty()) continue;
    if (fields.size() > 2)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected one or two columns");
    const std::string& text = fields.back();
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || v < 1)
      throw ParseError(path + ":" + std::to_string(line_no) + ": invalid generating-vector entry '" + text + "'");
    values.push_back(v);
    if (static_cast<int>(values.size()) == s) break;
  }
  if (static_cast<int>(values.size()) < s) {
    throw ParseError(path + ": only " + std::to_string(values.size()) + " entries, " + std::to_string(s) +
                     " requested");
  }
  return values;
}

void save_generating_vector(const std::string& path, std::span<const std::int64_t> z) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write generating-vector file " + path);
  for (std::size_t j = 0; j < z.size(); ++j) out << (j + 1) << ' ' << z[j] << '\n';
}

bool is_prime(std::int64_t m) {
  if (m < 2) return false;
  if (m % 2 == 0) return m == 2;
  for (std::int64_t d = 3; d * d <= m; d += 2)
    if (m % d == 0) return false;
  return true;
}

std::int64_t next_prime(std::int64_t m) {
  if (m < 2) throw InvalidArgument("next_prime requires m >= 2");
  while (!is_prime(m)) ++m;
  return m;
}

}  // namespace shapeqmc

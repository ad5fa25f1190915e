// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "lattice_oracles.hpp"
#include "shapeqmc/experiment.hpp"
#include "shapeqmc/parallel.hpp"
#include "shapeqmc/rng.hpp"

using namespace shapeqmc;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %d %-34s %s  %s\n", id, name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Gauss-Legendre rule on [-1/2, 1/2] by Golub-Welsch.
void gauss_legendre(int m, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  nodes.resize(static_cast<std::size_t>(m));
  weights.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    nodes[static_cast<std::size_t>(i)] = 0.5 * eig.eigenvalues()(i);
    const double v = eig.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = v * v;  // sums to 1 = |[-1/2, 1/2]|
  }
}

void convergence_criteria(int threads) {
  ExperimentConfig c;
  c.methods = {"mc", "qmc"};
  Timer timer;
  const auto result = run_convergence(c, threads);
  const double secs = timer.seconds();
  SlopeFit mc, qmc;
  for (const auto& [method, fit] : result.fits) (method == "mc" ? mc : qmc) = fit;
  report(1, "QMC rms slope", qmc.slope <= -0.8 && qmc.residual < 0.15 && secs <= 1800.0,
         fmt("slope %.3f (<= -0.8), residual %.3f (< 0.15), %.0f s on %d threads", qmc.slope, qmc.residual, secs,
             threads));
  const double ratio = qmc.slope / mc.slope;
  report(2, "MC rms slope", mc.slope >= -0.65 && mc.slope <= -0.35 && ratio >= 1.6,
         fmt("slope %.3f (in [-0.65, -0.35]), QMC/MC slope ratio %.2f (>= 1.6), seed %llu", mc.slope, ratio,
             static_cast<unsigned long long>(c.seed_mc)));
}

void bound_criterion() {
  int checks = 0, violations = 0;
  double worst = 0.0;
  for (std::int64_t n : {67, 127, 257})
    for (int s = 1; s <= 10; ++s)
      for (int i = 0; i <= 9; ++i) {
        const auto w = pod_weights(GevreyProfile{}, 0.55 + 0.05 * i, s, false, {});
        const double e = shift_averaged_wce(cbc_construct(n, s, w), n, w);
        for (int k = 0; k <= 9; ++k) {
          const double bound = error_bound(w, n, 0.55 + 0.05 * k);
          ++checks;
          worst = std::max(worst, e / bound);
          if (!(e <= bound * (1.0 + 1e-12))) ++violations;
        }
      }
  report(3, "worst-case error below bound", violations == 0,
         fmt("%d of %d (n, s, weights, lambda) cases violate; max e/bound %.3e", violations, checks, worst));
}

void cbc_criterion() {
  int cases = 0, mismatches = 0;
  for (std::int64_t n : {2, 3, 5, 7, 11, 13})
    for (int s = 1; s <= 3; ++s)
      for (const auto& w : oracle::weight_presets(s)) {
        ++cases;
        if (cbc_construct(n, s, w) != oracle::exhaustive_cbc(n, s, w)) ++mismatches;
      }
  report(4, "CBC matches exhaustive search", mismatches == 0, fmt("%d mismatches in %d cases", mismatches, cases));
}

void fem_criterion() {
  ExperimentConfig c;
  Timer timer;
  const auto result = run_fem_study(c);
  const double secs = timer.seconds();
  bool ok = result.analytic_rates.size() >= 3 && secs <= 60.0;
  std::string rates;
  for (double r : result.analytic_rates) {
    ok = ok && r >= 1.7 && r <= 2.3;
    rates += fmt(" %.3f", r);
  }
  report(5, "FEM rate, analytic disk", ok, fmt("rates%s (in [1.7, 2.3]), %.1f s", rates.c_str(), secs));
}

void truncation_criterion(int threads) {
  ExperimentConfig c;
  Timer timer;
  const auto result = run_truncation_study(c, threads);
  const double secs = timer.seconds();
  report(6, "dimension truncation slope", result.fit.slope <= -2.0 && secs <= 600.0,
         fmt("slope %.3f (<= -2.0), residual %.3f, %.0f s", result.fit.slope, result.fit.residual, secs));
}

void low_dimensional_criterion(int threads) {
  ExperimentConfig c;
  c.s = 2;
  const auto setup = prepare(c);
  const PosteriorProblem problem(setup.field, setup.source, c.mesh_level, setup.data);
  const std::int64_t n = 4001;
  const auto z = cbc_construct(n, 2, tailored_weights(c, 2));
  const LatticeRule rule(n, z, 1, c.seed_shifts);
  const auto q = ratio_estimator(problem, rule, 0, threads).ratio();

  std::vector<double> x, w;
  gauss_legendre(50, x, w);
  const std::size_t m = x.size();
  std::vector<double> weights(m * m);
  for (std::size_t i = 0; i < m * m; ++i) weights[i] = w[i / m] * w[i % m];
  const auto gauss = problem.estimate(
      m * m,
      [&](std::size_t i, std::span<double> y) {
        y[0] = x[i / m];
        y[1] = x[i % m];
      },
      weights, threads);
  const auto ref = gauss.ratio();
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) worst = std::max(worst, std::abs(q[i] - ref[i]));
  report(7, "s = 2 posterior vs Gauss product", worst <= 1e-3,
         fmt("max component difference %.3e (<= 1e-3) over %zu mesh nodes, n = %lld", worst,
             problem.eval_points().size(), static_cast<long long>(n)));
}

void invariant_criterion() {
  std::vector<std::string> failed;
  auto check = [&](const std::string& name, bool ok) {
    if (!ok) failed.push_back(name);
  };
  std::mt19937_64 gen(20240606);
  auto random_y = [&](int s) {
    std::vector<double> y(static_cast<std::size_t>(s));
    for (auto& v : y) v = uniform01(gen) - 0.5;
    return ParameterVector(y);
  };
  auto random_point = [&](double r_min) {
    const double r = r_min + (0.99 - r_min) * std::sqrt(uniform01(gen));
    const double phi = 2.0 * std::numbers::pi * uniform01(gen);
    return Point2(r * std::cos(phi), r * std::sin(phi));
  };

  const auto field = PerturbationField::paper_radial(20);
  bool fd_ok = true, spd_ok = true, identity_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 x = random_point(0.1);
    const auto y = random_y(20);
    const Matrix2 J = field.jacobian(x, y);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Point2 xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const Point2 col = (field.evaluate_map(xp, y) - field.evaluate_map(xm, y)) / (2.0 * h);
      fd_ok = fd_ok && (col - J.col(k)).cwiseAbs().maxCoeff() <= 1e-5 * J.cwiseAbs().maxCoeff();
    }
    const Matrix2 A = diffusion_matrix(J);
    spd_ok = spd_ok && (A - A.transpose()).norm() <= 1e-12 && A(0, 0) > 0.0 && A.determinant() > 0.0;
    const auto lower = ParameterVector::constant(20, -0.5);
    identity_ok = identity_ok && field.evaluate_map(x, lower) == x && field.jacobian(x, lower) == Matrix2::Identity();
  }
  check("jacobian-fd", fd_ok);
  check("spd", spd_ok);
  check("identity-endpoint", identity_ok);

  const std::vector<std::int64_t> z{1, 182, 28, 63, 97};
  const LatticeRule rule(251, z, 4, 7);
  std::vector<std::vector<double>> plus_one;
  for (int r = 0; r < 4; ++r) {
    auto d = rule.shift(r);
    for (double& v : d) v += 1.0;
    plus_one.push_back(d);
  }
  const LatticeRule shifted(251, z, plus_one);
  bool periodic = true, in_range = true;
  for (int r = 0; r < 4; ++r) {
    const auto a = rule.generate_points(r), b = shifted.generate_points(r);
    for (std::size_t l = 0; l < a.size(); ++l)
      for (std::size_t j = 0; j < z.size(); ++j) {
        periodic = periodic && std::abs(a[l][j] - b[l][j]) <= 1e-15;
        in_range = in_range && a[l][j] >= -0.5 && a[l][j] < 0.5 && b[l][j] >= -0.5 && b[l][j] < 0.5;
      }
  }
  check("shift-periodicity", periodic);
  check("node-range", in_range);

  ExperimentConfig small;
  small.s = 5;
  small.s_star = 10;
  small.mesh_level = 3;
  small.h_star_level = 4;
  small.R = 3;
  small.n_list = {67, 127};
  small.methods = {"mc", "qmc"};
  const auto setup = prepare(small);
  const PosteriorProblem problem(setup.field, setup.source, small.mesh_level, setup.data);
  const LatticeRule qmc(127, cbc_construct(127, 5, tailored_weights(small, 5)), 3, small.seed_shifts);
  std::vector<ShiftEstimate> shifts;
  for (int r = 0; r < 3; ++r) shifts.push_back(ratio_estimator(problem, qmc, r, 1));
  bool positive = true;
  for (const auto& e : shifts) positive = positive && e.z() > 0.0 && e.z_scaled > 0.0 && e.z_scaled <= 1.0 + 1e-15;
  check("z-positivity", positive);
  const auto post = posterior_mean(shifts);
  check("origin-pinning", post.mean_field[0] == 0.0 && post.mean_field[1] == 0.0);

  auto flat = setup.data;
  flat.precision.setZero();
  const PosteriorProblem flat_problem(setup.field, setup.source, small.mesh_level, flat);
  const auto fe = ratio_estimator(flat_problem, qmc, 0, 1);
  const auto fq = fe.ratio();
  bool flat_ok = fe.log_scale == 0.0 && fe.z() == 1.0;
  std::vector<double> y(5);
  const auto& pts = flat_problem.eval_points();
  std::vector<double> prior(2 * pts.size(), 0.0);
  for (std::int64_t l = 0; l < qmc.n(); ++l) {
    qmc.point(l, 0, y);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const Point2 v = setup.field.evaluate_map(pts[p], ParameterVector(y));
      prior[2 * p] += v[0] / static_cast<double>(qmc.n());
      prior[2 * p + 1] += v[1] / static_cast<double>(qmc.n());
    }
  }
  for (std::size_t i = 0; i < fq.size(); ++i) flat_ok = flat_ok && std::abs(fq[i] - prior[i]) <= 1e-14;
  check("flat-likelihood", flat_ok);

  const auto base = std::filesystem::current_path() / "acceptance_threads";
  std::filesystem::remove_all(base);
  write_convergence((base / "t1").string(), run_convergence(small, 1));
  write_convergence((base / "t3").string(), run_convergence(small, 3));
  check("thread-determinism", slurp(base / "t1" / "convergence.csv") == slurp(base / "t3" / "convergence.csv") &&
                                  slurp(base / "t1" / "convergence_fit.csv") ==
                                      slurp(base / "t3" / "convergence_fit.csv"));

  std::string detail = "9 suites";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  report(8, "invariant suites", failed.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::max(1, std::atoi(argv[1])) : default_thread_count();
  const std::vector<std::function<void()>> steps{
      [&] { convergence_criteria(threads); }, bound_criterion, cbc_criterion, fem_criterion,
      [&] { truncation_criterion(threads); }, [&] { low_dimensional_criterion(threads); }, invariant_criterion};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      std::printf("error: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

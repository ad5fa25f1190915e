#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shapeqmc/field.hpp"
#include "shapeqmc/rng.hpp"

using namespace shapeqmc;

namespace {

std::vector<double> random_y(std::mt19937_64& gen, int s) {
  std::vector<double> y(static_cast<std::size_t>(s));
  for (auto& v : y) v = uniform01(gen) - 0.5;
  return y;
}

Point2 random_disk_point(std::mt19937_64& gen, double r_min = 0.05) {
  const double r = r_min + (0.99 - r_min) * std::sqrt(uniform01(gen));
  const double phi = 2.0 * std::numbers::pi * uniform01(gen);
  return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace

TEST_CASE("parameter vector rejects entries outside the box") {
  CHECK_NOTHROW(ParameterVector({-0.5, 0.5, 0.0}));
  CHECK_THROWS_AS(ParameterVector({0.0, 0.51}), InvalidArgument);
  CHECK_THROWS_AS(ParameterVector({std::nan("")}), InvalidArgument);
  const auto y = ParameterVector({0.1, -0.2}).extended(4);
  CHECK(y.size() == 4);
  CHECK(y[2] == 0.0);
  CHECK(y[3] == 0.0);
  CHECK_THROWS_AS(ParameterVector({0.1, 0.2}).extended(1), InvalidArgument);
}

TEST_CASE("Gevrey profile summability") {
  GevreyProfile g;
  const auto sum = g.summability(1000);
  CHECK(sum.partial_sum > 1.0);
  CHECK(sum.tail_bound > 0.0);
  g.p = 0.4;  // 2.1 * 0.4 < 1
  CHECK_THROWS_AS(g.summability(), InvalidArgument);
  GevreyProfile bad;
  bad.beta = 0.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("mode activation extends continuously to the lower endpoint") {
  CHECK(mode_activation(-0.5) == 0.0);
  CHECK(mode_activation(0.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(mode_activation(0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(mode_activation(-0.5 + 1e-3) <= 1e-300);
}

TEST_CASE("polar angle convention") {
  CHECK(polar_angle({0.0, 0.0}) == 0.0);
  CHECK(polar_angle({0.0, 1.0}) == doctest::Approx(std::numbers::pi / 2));
  CHECK(polar_angle({-1.0, 0.0}) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("radial profile examples") {
  const auto field = PerturbationField::paper_radial(3);
  CHECK(field.radial_profile({0.3, -0.7}, ParameterVector::constant(3, -0.5)) == 1.0);
  CHECK(PerturbationField::identity(2).radial_profile({0.1, 0.2}, ParameterVector::constant(2, 0.3)) == 1.0);
  const auto one_mode = PerturbationField::paper_radial(1);
  CHECK(one_mode.radial_profile({1.0, 0.0}, ParameterVector::constant(1, 0.0)) == 1.0);
  // Independent mpmath evaluation of the series.
  CHECK(field.radial_profile({0.3, 0.4}, ParameterVector({0.1, -0.2, 0.3})) ==
        doctest::Approx(1.1033730274245644162).epsilon(1e-14));
  const auto two = PerturbationField::paper_radial(2);
  CHECK(two.radial_profile({-0.6, 0.7}, ParameterVector({0.0, 0.0})) ==
        doctest::Approx(1.1195215645685947025).epsilon(1e-14));
}

TEST_CASE("evaluate map examples") {
  const auto id = PerturbationField::identity(2);
  const Point2 v = id.evaluate_map({0.3, -0.4}, ParameterVector({0.2, 0.1}));
  CHECK(v[0] == 0.3);
  CHECK(v[1] == -0.4);
  const auto field = PerturbationField::paper_radial(4);
  const Point2 origin = field.evaluate_map({0.0, 0.0}, ParameterVector({0.4, 0.1, -0.3, 0.2}));
  CHECK(origin[0] == 0.0);
  CHECK(origin[1] == 0.0);
  const auto two = PerturbationField::paper_radial(2);
  const Point2 e1 = two.evaluate_map({1.0, 0.0}, ParameterVector({0.0, 0.0}));
  CHECK(e1[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(e1[1]) == 0.0);
}

TEST_CASE("identity endpoint is exact") {
  const auto field = PerturbationField::paper_radial(20);
  const auto y = ParameterVector::constant(20, -0.5);
  std::mt19937_64 gen(7);
  for (int i = 0; i < 200; ++i) {
    const Point2 x = random_disk_point(gen, 0.0);
    const Point2 v = field.evaluate_map(x, y);
    CHECK(v[0] == x[0]);
    CHECK(v[1] == x[1]);
    if (x.norm() > 0.0) CHECK(field.jacobian(x, y) == Matrix2::Identity());
  }
}

TEST_CASE("jacobian matches the oracle and finite differences") {
  const auto field = PerturbationField::paper_radial(3);
  const ParameterVector y({0.1, -0.2, 0.3});
  const Matrix2 J = field.jacobian({0.5, 0.2}, y);
  const double expected[2][2] = {{1.2219966706422863826, -0.04477187628911287145},
                                 {0.0071635002062580602274, 1.1861791696109960834}};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) CHECK(J(i, k) == doctest::Approx(expected[i][k]).epsilon(1e-12));

  CHECK_THROWS_AS(field.jacobian({0.0, 0.0}, y), DomainError);
  CHECK(PerturbationField::identity(3).jacobian({0.0, 0.0}, y) == Matrix2::Identity());

  // 100 random (x, y): central differences with step 1e-6, relative error <= 1e-5.
  const auto big = PerturbationField::paper_radial(20);
  std::mt19937_64 gen(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Point2 x = random_disk_point(gen, 0.1);
    const ParameterVector yy(random_y(gen, 20));
    const Matrix2 Jc = big.jacobian(x, yy);
    Matrix2 Jfd;
    for (int k = 0; k < 2; ++k) {
      Point2 xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      Jfd.col(k) = (big.evaluate_map(xp, yy) - big.evaluate_map(xm, yy)) / (2.0 * h);
    }
    const double scale = Jc.cwiseAbs().maxCoeff();
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) CHECK(std::abs(Jc(i, k) - Jfd(i, k)) <= 1e-5 * scale);
  }
}

TEST_CASE("diffusion matrix") {
  CHECK(diffusion_matrix(Matrix2::Identity()) == Matrix2::Identity());
  Matrix2 conformal = 2.0 * Matrix2::Identity();
  CHECK((diffusion_matrix(conformal) - Matrix2::Identity()).norm() < 1e-15);
  Matrix2 flipped;
  flipped << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(diffusion_matrix(flipped), DegenerateMapError);
  CHECK_THROWS_AS(diffusion_matrix(Matrix2::Zero()), DegenerateMapError);

  const auto field = PerturbationField::paper_radial(3);
  const Matrix2 A = diffusion_matrix(field, {0.5, 0.2}, ParameterVector({0.1, -0.2, 0.3}));
  CHECK(A(0, 0) == doctest::Approx(0.97185722446633170449).epsilon(1e-12));
  CHECK(A(0, 1) == doctest::Approx(0.031875434866719660365).epsilon(1e-11));
  CHECK(A(1, 1) == doctest::Approx(1.0300031919787626575).epsilon(1e-12));
}

TEST_CASE("diffusion matrix is symmetric positive definite on samples") {
  const auto field = PerturbationField::paper_radial(20);
  std::mt19937_64 gen(3);
  for (int i = 0; i < 500; ++i) {
    const Point2 x = random_disk_point(gen, 0.01);
    const Matrix2 A = diffusion_matrix(field, x, ParameterVector(random_y(gen, 20)));
    CHECK((A - A.transpose()).norm() <= 1e-12);
    CHECK(A.trace() > 0.0);
    CHECK(A.determinant() > 0.0);
  }
}

TEST_CASE("pullback source") {
  const auto id = PerturbationField::identity(1);
  const auto y = ParameterVector::constant(1, 0.2);
  CHECK(pullback_source(id, constant_source(1.0), {0.4, 0.1}, y) == 1.0);
  CHECK(pullback_source(id, paper_source(), {0.0, 0.0}, y) == -5.0);
  const auto field = PerturbationField::paper_radial(3);
  CHECK(pullback_source(field, paper_source(), {0.5, 0.2}, ParameterVector({0.1, -0.2, 0.3})) ==
        doctest::Approx(-1.11428153873407313).epsilon(1e-12));
}

TEST_CASE("truncation pads with zeros bit for bit") {
  const auto field = PerturbationField::paper_radial(12);
  CHECK_THROWS_AS(field.truncate(0), InvalidArgument);
  CHECK_THROWS_AS(field.truncate(13), InvalidArgument);
  const auto t5 = field.truncate(5);
  const auto t3 = t5.truncate(3);
  const auto direct3 = field.truncate(3);
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    const Point2 x = random_disk_point(gen, 0.05);
    const ParameterVector y5(random_y(gen, 5));
    const Point2 a = t5.evaluate_map(x, y5);
    const Point2 b = field.evaluate_map(x, y5.extended(12));
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
    CHECK(t5.jacobian(x, y5) == field.jacobian(x, y5.extended(12)));
    const ParameterVector y3(random_y(gen, 3));
    CHECK(t3.evaluate_map(x, y3) == direct3.evaluate_map(x, y3));
  }
}

TEST_CASE("singular value bounds") {
  const auto [lo, hi] = singular_value_bounds(PerturbationField::identity(2), 100, 1);
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(1.0));
  UserMap diag{[](const Point2& x, std::span<const double>) { return Point2(0.5 * x[0], 3.0 * x[1]); },
               [](const Point2&, std::span<const double>) {
                 Matrix2 J;
                 J << 0.5, 0.0, 0.0, 3.0;
                 return J;
               }};
  const auto [dlo, dhi] = singular_value_bounds(PerturbationField::user_supplied(1, diag), 50, 2);
  CHECK(dlo == doctest::Approx(0.5));
  CHECK(dhi == doctest::Approx(3.0));
  const auto [plo, phi] = singular_value_bounds(PerturbationField::paper_radial(20), 10000, 2024);
  CHECK(plo > 0.0);
  CHECK(plo <= 1.0);
  CHECK(phi >= 1.0);
  const auto [plo2, phi2] = singular_value_bounds(PerturbationField::paper_radial(20), 10000, 2024);
  CHECK(plo2 == plo);
  CHECK(phi2 == phi);
  CHECK_THROWS_AS(singular_value_bounds(PerturbationField::identity(1), 0, 1), InvalidArgument);
}

TEST_CASE("field sampler agrees with pointwise evaluation") {
  const auto field = PerturbationField::paper_radial(30).truncate(10);
  std::mt19937_64 gen(9);
  std::vector<Point2> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(random_disk_point(gen, 0.05));
  pts.emplace_back(0.0, 0.0);
  const FieldSampler sampler(field, pts);
  const ParameterVector y(random_y(gen, 10));
  std::vector<Point2> map(pts.size());
  sampler.evaluate(y, map, {});
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((map[i] - field.evaluate_map(pts[i], y)).norm() <= 1e-14);
  std::vector<Matrix2> jac(pts.size());
  CHECK_THROWS_AS(sampler.evaluate(y, map, jac), DomainError);
  pts.pop_back();
  const FieldSampler interior(field, pts);
  map.resize(pts.size());
  jac.resize(pts.size());
  interior.evaluate(y, map, jac);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((jac[i] - field.jacobian(pts[i], y)).norm() <= 1e-13);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "shapeqmc/mesh.hpp"

using namespace shapeqmc;

TEST_CASE("hexagon fan and refinement counts") {
  const std::size_t nodes[] = {7, 19, 61, 217, 817};
  for (int level = 0; level <= 4; ++level) {
    const Mesh m = build_disk_mesh(level);
    CAPTURE(level);
    CHECK(m.level == level);
    CHECK(m.triangle_count() == 6u * (1u << (2 * level)));
    CHECK(m.node_count() == nodes[level]);
    CHECK(m.boundary_nodes().size() == 6u * (1u << level));
    CHECK_NOTHROW(m.check_invariants());
  }
  CHECK_THROWS_AS(build_disk_mesh(-1), InvalidArgument);
}

TEST_CASE("mesh invariants hold on every level") {
  Mesh m = build_disk_mesh(0);
  double previous_h = m.h;
  for (int level = 1; level <= 6; ++level) {
    m = refine(m);
    CAPTURE(level);
    CHECK_NOTHROW(m.check_invariants());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) CHECK(m.area(t) > 0.0);
    for (int b : m.boundary_nodes()) CHECK(std::abs(m.nodes[static_cast<std::size_t>(b)].norm() - 1.0) <= 1e-14);
    for (std::size_t i = 0; i < m.node_count(); ++i)
      if (!m.is_boundary(static_cast<int>(i))) CHECK(m.nodes[i].norm() < 1.0);
    if (level >= 2) CHECK(m.h <= 0.55 * previous_h);
    CHECK(m.total_area() < std::numbers::pi);
    previous_h = m.h;
  }
  // Inscribed polygon with 6 * 2^6 sides.
  const double sides = 6.0 * 64.0;
  CHECK(m.total_area() == doctest::Approx(0.5 * sides * std::sin(2.0 * std::numbers::pi / sides)).epsilon(1e-12));
}

TEST_CASE("refine matches a direct build") {
  const Mesh a = refine(build_disk_mesh(2));
  const Mesh b = build_disk_mesh(3);
  REQUIRE(a.node_count() == b.node_count());
  REQUIRE(a.triangle_count() == b.triangle_count());
  for (std::size_t i = 0; i < a.node_count(); ++i) CHECK((a.nodes[i] - b.nodes[i]).norm() == 0.0);
  CHECK(a.triangles == b.triangles);
}

TEST_CASE("level for mesh size") {
  CHECK(level_for_mesh_size(1.0 + 1e-12) == 0);
  CHECK(level_for_mesh_size(0.1) == 4);
  CHECK(build_disk_mesh(level_for_mesh_size(0.03)).h <= 0.03);
  CHECK(build_disk_mesh(level_for_mesh_size(0.03) - 1).h > 0.03);
  CHECK_THROWS_AS(level_for_mesh_size(0.0), InvalidArgument);
}

TEST_CASE("check_invariants reports a flipped triangle") {
  Mesh m = build_disk_mesh(1);
  std::swap(m.triangles[3][1], m.triangles[3][2]);
  CHECK_THROWS_AS(m.check_invariants(), Error);
}

TEST_CASE("barycentric coordinates and point location") {
  const Mesh m = build_disk_mesh(3);
  PointLocator locator(m);
  for (std::size_t t = 0; t < m.triangle_count(); t += 7) {
    const auto& tri = m.triangles[t];
    const Point2 c = (m.nodes[static_cast<std::size_t>(tri[0])] + m.nodes[static_cast<std::size_t>(tri[1])] +
                      m.nodes[static_cast<std::size_t>(tri[2])]) /
                     3.0;
    const auto bary = barycentric(m, t, c);
    for (double b : bary) CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const auto loc = locator.locate(c);
    REQUIRE(loc.has_value());
    CHECK(static_cast<std::size_t>(loc->triangle) == t);
  }
  const auto origin = locator.locate({0.0, 0.0});
  REQUIRE(origin.has_value());
  double sum = 0.0;
  for (double b : origin->barycentric) sum += b;
  CHECK(sum == doctest::Approx(1.0));
  CHECK_FALSE(locator.locate({1.2, 0.0}).has_value());
  // Just outside a chord near the circle: inside the disk, outside the polygon.
  const double phi = std::numbers::pi / 48.0 * 0.5;
  CHECK_FALSE(locator.locate({0.99999 * std::cos(phi), 0.99999 * std::sin(phi)}).has_value());
}

TEST_CASE("write_mesh format") {
  const Mesh m = build_disk_mesh(0);
  std::vector<std::vector<double>> cols{std::vector<double>(m.node_count(), 2.5)};
  std::ostringstream out;
  write_mesh(out, m, cols);
  std::istringstream in(out.str());
  std::string w1, w2;
  std::size_t n = 0, t = 0;
  in >> w1 >> n >> w2 >> t;
  CHECK(w1 == "nodes");
  CHECK(w2 == "triangles");
  CHECK(n == 7);
  CHECK(t == 6);
  double x, y, v;
  int flag;
  in >> x >> y >> flag >> v;
  CHECK(v == 2.5);
  std::vector<std::vector<double>> bad{std::vector<double>(3, 0.0)};
  std::ostringstream sink;
  CHECK_THROWS_AS(write_mesh(sink, m, bad), InvalidArgument);
}

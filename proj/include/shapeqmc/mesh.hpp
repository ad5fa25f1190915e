#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "shapeqmc/common.hpp"

namespace shapeqmc {

/// Conforming triangulation of (a polygonal approximation of) the unit disk.
struct Mesh {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<std::uint8_t> boundary;         // 1 for nodes on the unit circle
  double h = 0.0;                             // longest edge
  int level = 0;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool is_boundary(int node) const { return boundary[static_cast<std::size_t>(node)] != 0; }
  std::vector<int> boundary_nodes() const;

  /// Signed area of triangle t.
  double area(std::size_t t) const;
  double total_area() const;

  /// Recomputes h from the triangles.
  void update_mesh_size();

  /// Throws Error describing the first violated invariant (orientation,
  /// boundary placement, conformity, h).
  void check_invariants() const;
};

/// Hexagon fan around the origin, refined `level` times.
Mesh build_disk_mesh(int level);

/// Uniform midpoint refinement; new boundary midpoints are projected onto the
/// unit circle.
Mesh refine(const Mesh& mesh);

/// Smallest level whose mesh size does not exceed h_target.
int level_for_mesh_size(double h_target);

/// Plain-text export: `nodes N triangles T`, N lines `x y boundary_flag
/// [value...]`, T lines `i j k`. `nodal_values` holds optional extra columns,
/// each of length N.
void write_mesh(std::ostream& out, const Mesh& mesh,
                std::span<const std::vector<double>> nodal_values = {});

struct Location {
  int triangle;
  std::array<double, 3> barycentric;
};

/// Barycentric coordinates of x with respect to triangle t.
std::array<double, 3> barycentric(const Mesh& mesh, std::size_t t, const Point2& x);

/// Point location with a walk from the previous hit and a brute-force
/// fallback. Holds per-caller state; use one locator per thread.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  /// Containing triangle, or nullopt if x lies outside the meshed region.
  std::optional<Location> locate(const Point2& x);

 private:
  bool inside(const std::array<double, 3>& bary) const;
  std::optional<Location> walk(const Point2& x, int start);
  std::optional<Location> scan(const Point2& x);

  const Mesh* mesh_;
  std::vector<std::array<int, 3>> neighbors_;  // across the edge opposite vertex k
  int last_ = 0;
};

}  // namespace shapeqmc

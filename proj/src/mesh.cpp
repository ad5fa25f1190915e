#include "shapeqmc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>

namespace shapeqmc {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Edge -> number of triangles using it.
std::map<Edge, int> edge_usage(const Mesh& mesh) {
  std::map<Edge, int> usage;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++usage[make_edge(t[k], t[(k + 1) % 3])];
  }
  return usage;
}

}  // namespace

std::vector<int> Mesh::boundary_nodes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (boundary[i]) out.push_back(static_cast<int>(i));
  return out;
}

double Mesh::area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point2 e1 = nodes[static_cast<std::size_t>(tri[1])] - nodes[static_cast<std::size_t>(tri[0])];
  const Point2 e2 = nodes[static_cast<std::size_t>(tri[2])] - nodes[static_cast<std::size_t>(tri[0])];
  return 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]);
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) sum += area(t);
  return sum;
}

void Mesh::update_mesh_size() {
  double longest = 0.0;
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      const double len =
          (nodes[static_cast<std::size_t>(t[k])] - nodes[static_cast<std::size_t>(t[(k + 1) % 3])]).norm();
      longest = std::max(longest, len);
    }
  }
  h = longest;
}

void Mesh::check_invariants() const {
  if (boundary.size() != nodes.size()) throw Error("mesh: boundary flags do not match node count");
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int v : triangles[t]) {
      if (v < 0 || static_cast<std::size_t>(v) >= nodes.size())
        throw Error("mesh: triangle " + std::to_string(t) + " references a missing node");
    }
    if (!(area(t) > 0.0)) throw Error("mesh: triangle " + std::to_string(t) + " is not positively oriented");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (boundary[i] && std::abs(nodes[i].norm() - 1.0) > 1e-12)
      throw Error("mesh: boundary node " + std::to_string(i) + " is off the unit circle");
  }
  for (const auto& [edge, count] : edge_usage(*this)) {
    if (count > 2) throw Error("mesh: edge shared by more than two triangles");
    const bool on_boundary = is_boundary(edge.first) && is_boundary(edge.second);
    if (count == 1 && !on_boundary) throw Error("mesh: hanging edge in the interior");
  }
  Mesh copy_h = *this;
  copy_h.update_mesh_size();
  if (copy_h.h != h) throw Error("mesh: stored h differs from the longest edge");
}

Mesh build_disk_mesh(int level) {
  if (level < 0) throw InvalidArgument("mesh level must be >= 0");
  Mesh mesh;
  mesh.nodes.emplace_back(0.0, 0.0);
  mesh.boundary.push_back(0);
  for (int k = 0; k < 6; ++k) {
    const double phi = k * std::numbers::pi / 3.0;
    mesh.nodes.emplace_back(std::cos(phi), std::sin(phi));
    mesh.boundary.push_back(1);
  }
  for (int k = 0; k < 6; ++k) mesh.triangles.push_back({0, 1 + k, 1 + (k + 1) % 6});
  mesh.update_mesh_size();
  for (int l = 0; l < level; ++l) mesh = refine(mesh);
  return mesh;
}

Mesh refine(const Mesh& mesh) {
  Mesh out;
  out.nodes = mesh.nodes;
  out.boundary = mesh.boundary;
  out.level = mesh.level + 1;
  const auto usage = edge_usage(mesh);
  std::map<Edge, int> midpoint;
  auto mid = [&](int a, int b) {
    const Edge e = make_edge(a, b);
    if (auto it = midpoint.find(e); it != midpoint.end()) return it->second;
    Point2 m = 0.5 * (mesh.nodes[static_cast<std::size_t>(a)] + mesh.nodes[static_cast<std::size_t>(b)]);
    const bool on_boundary = usage.at(e) == 1;
    if (on_boundary) m /= m.norm();
    const int idx = static_cast<int>(out.nodes.size());
    out.nodes.push_back(m);
    out.boundary.push_back(on_boundary ? 1 : 0);
    midpoint.emplace(e, idx);
    return idx;
  };
  out.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    out.triangles.push_back({t[0], ab, ca});
    out.triangles.push_back({ab, t[1], bc});
    out.triangles.push_back({ca, bc, t[2]});
    out.triangles.push_back({ab, bc, ca});
  }
  out.update_mesh_size();
  return out;
}

int level_for_mesh_size(double h_target) {
  if (!(h_target > 0.0)) throw InvalidArgument("target mesh size must be positive");
  Mesh mesh = build_disk_mesh(0);
  while (mesh.h > h_target) mesh = refine(mesh);
  return mesh.level;
}

void write_mesh(std::ostream& out, const Mesh& mesh, std::span<const std::vector<double>> nodal_values) {
  for (const auto& column : nodal_values) {
    if (column.size() != mesh.node_count()) throw InvalidArgument("write_mesh: nodal column size mismatch");
  }
  char buf[64];
  out << "nodes " << mesh.node_count() << " triangles " << mesh.triangle_count() << '\n';
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %d", mesh.nodes[i][0], mesh.nodes[i][1],
                  static_cast<int>(mesh.boundary[i]));
    out << buf;
    for (const auto& column : nodal_values) {
      std::snprintf(buf, sizeof buf, " %.17g", column[i]);
      out << buf;
    }
    out << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

std::array<double, 3> barycentric(const Mesh& mesh, std::size_t t, const Point2& x) {
  const auto& tri = mesh.triangles[t];
  const Point2& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
  const Point2& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
  const Point2& c = mesh.nodes[static_cast<std::size_t>(tri[2])];
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  const double l1 = ((b[0] - x[0]) * (c[1] - x[1]) - (b[1] - x[1]) * (c[0] - x[0])) / det;
  const double l2 = ((c[0] - x[0]) * (a[1] - x[1]) - (c[1] - x[1]) * (a[0] - x[0])) / det;
  return {l1, l2, 1.0 - l1 - l2};
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  neighbors_.assign(mesh.triangle_count(), {-1, -1, -1});
  std::map<Edge, std::pair<int, int>> owner;  // edge -> (triangle, local vertex opposite)
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const Edge e = make_edge(tri[(k + 1) % 3], tri[(k + 2) % 3]);
      auto [it, inserted] = owner.emplace(e, std::pair<int, int>{static_cast<int>(t), k});
      if (!inserted) {
        const auto [other, other_k] = it->second;
        neighbors_[t][static_cast<std::size_t>(k)] = other;
        neighbors_[static_cast<std::size_t>(other)][static_cast<std::size_t>(other_k)] = static_cast<int>(t);
      }
    }
  }
}

bool PointLocator::inside(const std::array<double, 3>& bary) const {
  constexpr double tol = 1e-12;
  return bary[0] >= -tol && bary[1] >= -tol && bary[2] >= -tol;
}

std::optional<Location> PointLocator::locate(const Point2& x) {
  if (mesh_->triangles.empty()) return std::nullopt;
  if (auto hit = walk(x, last_)) return hit;
  return scan(x);
}

std::optional<Location> PointLocator::walk(const Point2& x, int start) {
  const int max_steps = 64 + 4 * static_cast<int>(std::sqrt(static_cast<double>(mesh_->triangle_count())));
  int t = start;
  for (int step = 0; step < max_steps; ++step) {
    const auto bary = barycentric(*mesh_, static_cast<std::size_t>(t), x);
    if (inside(bary)) {
      last_ = t;
      return Location{t, bary};
    }
    const auto worst = static_cast<std::size_t>(std::min_element(bary.begin(), bary.end()) - bary.begin());
    const int next = neighbors_[static_cast<std::size_t>(t)][worst];
    if (next < 0) return std::nullopt;
    t = next;
  }
  return std::nullopt;
}

std::optional<Location> PointLocator::scan(const Point2& x) {
  for (std::size_t t = 0; t < mesh_->triangle_count(); ++t) {
    const auto bary = barycentric(*mesh_, t, x);
    if (inside(bary)) {
      last_ = static_cast<int>(t);
      return Location{static_cast<int>(t), bary};
    }
  }
  return std::nullopt;
}

}  // namespace shapeqmc

#include "shapeqmc/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace shapeqmc {

namespace {

constexpr double kResidualTolerance = 1e-10;

// Gradients of the three P1 basis functions on triangle t (constant per element).
std::array<Point2, 3> basis_gradients(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const Point2& a = mesh.nodes[static_cast<std::size_t>(tri[0])];
  const Point2& b = mesh.nodes[static_cast<std::size_t>(tri[1])];
  const Point2& c = mesh.nodes[static_cast<std::size_t>(tri[2])];
  const double twice_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  return {Point2(b[1] - c[1], c[0] - b[0]) / twice_area, Point2(c[1] - a[1], a[0] - c[0]) / twice_area,
          Point2(a[1] - b[1], b[0] - a[0]) / twice_area};
}

Point2 map_bary(const Mesh& mesh, std::size_t t, const double (&bary)[3]) {
  const auto& tri = mesh.triangles[t];
  return bary[0] * mesh.nodes[static_cast<std::size_t>(tri[0])] +
         bary[1] * mesh.nodes[static_cast<std::size_t>(tri[1])] +
         bary[2] * mesh.nodes[static_cast<std::size_t>(tri[2])];
}

// adj(J) adj(J)^T / det J, matching diffusion_matrix(J).
inline Matrix2 pullback_coefficient(const Matrix2& J, double det) {
  Matrix2 adj;
  adj << J(1, 1), -J(0, 1), -J(1, 0), J(0, 0);
  return (adj * adj.transpose()) / det;
}

inline void require_positive(double det) {
  if (!(det > 1e3 * std::numeric_limits<double>::epsilon())) {
    throw DegenerateMapError("det J = " + std::to_string(det) + " at a quadrature point");
  }
}

std::string format_point(const Point2& x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.17g, %.17g)", x[0], x[1]);
  return buf;
}

}  // namespace

std::vector<Point2> quadrature_points(const Mesh& mesh) {
  std::vector<Point2> pts;
  pts.reserve(mesh.triangle_count() * TriangleQuadrature::size);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    for (const auto& bary : TriangleQuadrature::bary) pts.push_back(map_bary(mesh, t, bary));
  }
  return pts;
}

LinearSystem assemble(const Mesh& mesh, const PerturbationField& field, const ParameterVector& y,
                      const ScalarField& f) {
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangle_count());
  Eigen::VectorXd load = Eigen::VectorXd::Zero(n);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto grads = basis_gradients(mesh, t);
    const double area = mesh.area(t);
    Eigen::Matrix3d ke = Eigen::Matrix3d::Zero();
    Eigen::Vector3d fe = Eigen::Vector3d::Zero();
    for (const auto& bary : TriangleQuadrature::bary) {
      const Point2 x = map_bary(mesh, t, bary);
      const Matrix2 J = field.jacobian(x, y);
      const double det = J.determinant();
      require_positive(det);
      const Matrix2 A = pullback_coefficient(J, det);
      const double fref = f(field.evaluate_map(x, y)) * det;
      const double w = TriangleQuadrature::weight * area;
      for (int a = 0; a < 3; ++a) {
        const Point2 ag = A * grads[static_cast<std::size_t>(a)];
        for (int b = 0; b < 3; ++b) ke(a, b) += w * ag.dot(grads[static_cast<std::size_t>(b)]);
        fe[a] += w * fref * bary[a];
      }
    }
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      load[tri[static_cast<std::size_t>(a)]] += fe[a];
      for (int b = 0; b < 3; ++b)
        triplets.emplace_back(tri[static_cast<std::size_t>(a)], tri[static_cast<std::size_t>(b)], ke(a, b));
    }
  }
  SparseMatrix k(n, n);
  k.setFromTriplets(triplets.begin(), triplets.end());
  return {std::move(k), std::move(load)};
}

FemSolution::FemSolution(std::shared_ptr<const Mesh> mesh, std::vector<double> coefficients, ParameterVector y)
    : mesh_(std::move(mesh)), coefficients_(std::move(coefficients)), y_(std::move(y)) {
  if (coefficients_.size() != mesh_->node_count()) throw InvalidArgument("FemSolution: coefficient count mismatch");
}

std::vector<double> FemSolution::evaluate(std::span<const Point2> points) const {
  PointEvaluator eval(*mesh_, points);
  return eval.apply(coefficients_);
}

FemSolution solve_dirichlet(const LinearSystem& system, std::shared_ptr<const Mesh> mesh, ParameterVector y) {
  const Mesh& m = *mesh;
  std::vector<int> dof(m.node_count(), -1);
  int interior = 0;
  for (std::size_t i = 0; i < m.node_count(); ++i)
    if (!m.boundary[i]) dof[i] = interior++;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int col = 0; col < system.stiffness.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(system.stiffness, col); it; ++it) {
      const int r = dof[static_cast<std::size_t>(it.row())];
      const int c = dof[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
    }
  }
  SparseMatrix k(interior, interior);
  k.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd f(interior);
  for (std::size_t i = 0; i < m.node_count(); ++i)
    if (dof[i] >= 0) f[dof[i]] = system.load[static_cast<Eigen::Index>(i)];

  Eigen::SimplicialLLT<SparseMatrix> llt(k);
  if (llt.info() != Eigen::Success) throw SolverFailure("stiffness matrix is not positive definite");
  Eigen::VectorXd u = llt.solve(f);
  const double fnorm = f.norm();
  if ((k * u - f).norm() > kResidualTolerance * fnorm) {
    u += llt.solve(f - k * u);
    if ((k * u - f).norm() > kResidualTolerance * fnorm) throw SolverFailure("residual tolerance not met");
  }
  std::vector<double> coeffs(m.node_count(), 0.0);
  for (std::size_t i = 0; i < m.node_count(); ++i)
    if (dof[i] >= 0) coeffs[i] = u[dof[i]];
  return FemSolution(std::move(mesh), std::move(coeffs), std::move(y));
}

std::vector<double> observation(const PerturbationField& field, const ParameterVector& y, int mesh_level,
                                const ScalarField& f, std::span<const Point2> ref_points) {
  if (ref_points.empty()) return {};
  auto mesh = std::make_shared<const Mesh>(build_disk_mesh(mesh_level));
  ForwardSolver solver(mesh, field, f);
  ForwardSolver::Workspace ws(solver);
  std::vector<double> u(mesh->node_count());
  solver.solve(y, ws, u);
  return PointEvaluator(*mesh, ref_points).apply(u);
}

double l2_error(const FemSolution& solution, const ScalarField& exact) {
  const Mesh& mesh = solution.mesh();
  const auto& u = solution.coefficients();
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double w = TriangleQuadrature::weight * mesh.area(t);
    for (const auto& bary : TriangleQuadrature::bary) {
      double uh = 0.0;
      for (int a = 0; a < 3; ++a) uh += bary[a] * u[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
      const double d = uh - exact(map_bary(mesh, t, bary));
      sum += w * d * d;
    }
  }
  return std::sqrt(sum);
}

double nodal_l2_norm(const Mesh& mesh, std::span<const double> values, int components) {
  const auto c = static_cast<std::size_t>(components);
  if (values.size() != mesh.node_count() * c) throw InvalidArgument("nodal_l2_norm: size mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double w = TriangleQuadrature::weight * mesh.area(t);
    for (const auto& bary : TriangleQuadrature::bary) {
      for (std::size_t k = 0; k < c; ++k) {
        double v = 0.0;
        for (int a = 0; a < 3; ++a) v += bary[a] * values[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)]) * c + k];
        sum += w * v * v;
      }
    }
  }
  return std::sqrt(sum);
}

PointEvaluator::PointEvaluator(const Mesh& mesh, std::span<const Point2> points) {
  PointLocator locator(mesh);
  nodes_.reserve(points.size());
  weights_.reserve(points.size());
  for (const auto& x : points) {
    auto loc = locator.locate(x);
    if (!loc) throw OutsideDomainError("point " + format_point(x) + " lies outside the mesh");
    nodes_.push_back(mesh.triangles[static_cast<std::size_t>(loc->triangle)]);
    weights_.push_back(loc->barycentric);
  }
}

std::vector<double> PointEvaluator::apply(std::span<const double> nodal) const {
  std::vector<double> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    double v = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double w = weights_[i][static_cast<std::size_t>(a)];
      // Exact nodal values at mesh nodes, without 0 * value round-off.
      if (w == 1.0) {
        v = nodal[static_cast<std::size_t>(nodes_[i][static_cast<std::size_t>(a)])];
        break;
      }
      v += w * nodal[static_cast<std::size_t>(nodes_[i][static_cast<std::size_t>(a)])];
    }
    out[i] = v;
  }
  return out;
}

ForwardSolver::ForwardSolver(std::shared_ptr<const Mesh> mesh, const PerturbationField& field, ScalarField f)
    : mesh_(std::move(mesh)),
      sampler_field_(field),
      source_(std::move(f)),
      sampler_(field, quadrature_points(*mesh_)) {
  const Mesh& m = *mesh_;
  dof_.assign(m.node_count(), -1);
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    if (!m.boundary[i]) {
      dof_[i] = static_cast<int>(interior_.size());
      interior_.push_back(static_cast<int>(i));
    }
  }
  gradients_.reserve(m.triangle_count());
  areas_.reserve(m.triangle_count());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    gradients_.push_back(basis_gradients(m, t));
    areas_.push_back(m.area(t));
    for (int a : m.triangles[t]) {
      for (int b : m.triangles[t]) {
        const int r = dof_[static_cast<std::size_t>(a)];
        const int c = dof_[static_cast<std::size_t>(b)];
        if (r >= 0 && c >= 0) triplets.emplace_back(r, c, 1.0);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(interior_.size());
  pattern_.resize(n, n);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();
  slots_.assign(9 * m.triangle_count(), -1);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const int r = dof_[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
        const int c = dof_[static_cast<std::size_t>(tri[static_cast<std::size_t>(b)])];
        if (r < 0 || c < 0) continue;
        const int* first = inner + outer[c];
        const int* last = inner + outer[c + 1];
        const int* hit = std::lower_bound(first, last, r);
        slots_[9 * t + static_cast<std::size_t>(3 * a + b)] = static_cast<int>(hit - inner);
      }
    }
  }
}

ForwardSolver::Workspace::Workspace(const ForwardSolver& solver)
    : matrix(solver.pattern_),
      rhs(static_cast<Eigen::Index>(solver.interior_.size())),
      solution(static_cast<Eigen::Index>(solver.interior_.size())),
      map(solver.sampler_.size()),
      jacobian(solver.sampler_.size()) {
  llt.analyzePattern(matrix);
}

void ForwardSolver::solve(const ParameterVector& y, Workspace& ws, std::span<double> nodal) const {
  const Mesh& m = *mesh_;
  if (nodal.size() != m.node_count()) throw InvalidArgument("ForwardSolver::solve: output size mismatch");
  sampler_.evaluate(y, ws.map, ws.jacobian);
  double* values = ws.matrix.valuePtr();
  std::fill(values, values + ws.matrix.nonZeros(), 0.0);
  ws.rhs.setZero();
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& grads = gradients_[t];
    const double w = TriangleQuadrature::weight * areas_[t];
    double ke[3][3] = {};
    double fe[3] = {};
    for (int q = 0; q < TriangleQuadrature::size; ++q) {
      const std::size_t idx = 3 * t + static_cast<std::size_t>(q);
      const Matrix2& J = ws.jacobian[idx];
      const double det = J.determinant();
      require_positive(det);
      const Matrix2 A = pullback_coefficient(J, det);
      const double fref = source_(ws.map[idx]) * det;
      for (int a = 0; a < 3; ++a) {
        const Point2 ag = A * grads[static_cast<std::size_t>(a)];
        for (int b = 0; b < 3; ++b) ke[a][b] += w * ag.dot(grads[static_cast<std::size_t>(b)]);
        fe[a] += w * fref * TriangleQuadrature::bary[q][a];
      }
    }
    const auto& tri = m.triangles[t];
    for (int a = 0; a < 3; ++a) {
      const int r = dof_[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
      if (r < 0) continue;
      ws.rhs[r] += fe[a];
      for (int b = 0; b < 3; ++b) {
        const int slot = slots_[9 * t + static_cast<std::size_t>(3 * a + b)];
        if (slot >= 0) values[slot] += ke[a][b];
      }
    }
  }
  ws.llt.factorize(ws.matrix);
  if (ws.llt.info() != Eigen::Success) throw SolverFailure("stiffness matrix is not positive definite");
  ws.solution = ws.llt.solve(ws.rhs);
  const double fnorm = ws.rhs.norm();
  if ((ws.matrix.selfadjointView<Eigen::Lower>() * ws.solution - ws.rhs).norm() > kResidualTolerance * fnorm) {
    ws.solution += ws.llt.solve(ws.rhs - ws.matrix.selfadjointView<Eigen::Lower>() * ws.solution);
    if ((ws.matrix.selfadjointView<Eigen::Lower>() * ws.solution - ws.rhs).norm() > kResidualTolerance * fnorm)
      throw SolverFailure("residual tolerance not met");
  }
  std::fill(nodal.begin(), nodal.end(), 0.0);
  for (std::size_t i = 0; i < interior_.size(); ++i)
    nodal[static_cast<std::size_t>(interior_[i])] = ws.solution[static_cast<Eigen::Index>(i)];
}

FemSolution ForwardSolver::solve(const ParameterVector& y, Workspace& ws) const {
  std::vector<double> u(mesh_->node_count());
  solve(y, ws, u);
  return FemSolution(mesh_, std::move(u), y);
}

}  // namespace shapeqmc

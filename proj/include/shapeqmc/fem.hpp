#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "shapeqmc/field.hpp"
#include "shapeqmc/mesh.hpp"

namespace shapeqmc {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Three-point, degree-2 Gauss rule on a triangle, in barycentric coordinates.
struct TriangleQuadrature {
  static constexpr int size = 3;
  static constexpr double weight = 1.0 / 3.0;  // times the triangle area
  static constexpr double bary[3][3] = {
      {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
      {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
      {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
  };
};

/// Physical quadrature points of every triangle, triangle-major.
std::vector<Point2> quadrature_points(const Mesh& mesh);

/// Galerkin system of the pullback problem over all mesh nodes, before
/// boundary conditions.
struct LinearSystem {
  SparseMatrix stiffness;
  Eigen::VectorXd load;
};

/// Assembles  int (A grad u) . grad v  and  int f_ref v  with P1 elements.
/// Evaluates the field pointwise; the batched path is ForwardSolver.
LinearSystem assemble(const Mesh& mesh, const PerturbationField& field, const ParameterVector& y,
                      const ScalarField& f);

/// Pullback solution, nodal P1 coefficients (zero on the boundary).
class FemSolution {
 public:
  FemSolution(std::shared_ptr<const Mesh> mesh, std::vector<double> coefficients, ParameterVector y);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  const ParameterVector& parameter() const { return y_; }

  /// P1 interpolation; throws OutsideDomainError naming the first point
  /// outside the mesh.
  std::vector<double> evaluate(std::span<const Point2> points) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<double> coefficients_;
  ParameterVector y_;
};

/// Homogeneous Dirichlet solve. Throws SolverFailure unless the interior
/// residual satisfies |K u - F| <= 1e-10 |F|.
FemSolution solve_dirichlet(const LinearSystem& system, std::shared_ptr<const Mesh> mesh, ParameterVector y);

/// Solves at y on a disk mesh of the given level and returns u-hat at the
/// reference points.
std::vector<double> observation(const PerturbationField& field, const ParameterVector& y, int mesh_level,
                                const ScalarField& f, std::span<const Point2> ref_points);

/// L2(D_h) distance between the P1 solution and `exact`, 3-point Gauss per triangle.
double l2_error(const FemSolution& solution, const ScalarField& exact);

/// L2(D_h) norm of nodal P1 data with `components` values per node (vector
/// fields are stored node-major).
double nodal_l2_norm(const Mesh& mesh, std::span<const double> values, int components = 1);

/// Fixed linear functional u -> (u(x_0), ..., u(x_{k-1})) on P1 functions.
class PointEvaluator {
 public:
  /// Throws OutsideDomainError if a point is not inside the mesh.
  PointEvaluator(const Mesh& mesh, std::span<const Point2> points);

  std::size_t size() const { return weights_.size(); }
  std::vector<double> apply(std::span<const double> nodal) const;

 private:
  std::vector<std::array<int, 3>> nodes_;
  std::vector<std::array<double, 3>> weights_;
};

/// Repeated pullback solves for one mesh, field and source.
///
/// Geometry, quadrature tables and the sparsity pattern are built once; each
/// solve reassembles values into the fixed pattern and refactorizes.
class ForwardSolver {
 public:
  ForwardSolver(std::shared_ptr<const Mesh> mesh, const PerturbationField& field, ScalarField f);

  /// Per-thread scratch: matrix with fixed pattern and an analyzed factorization.
  class Workspace {
   public:
    explicit Workspace(const ForwardSolver& solver);

   private:
    friend class ForwardSolver;
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    Eigen::VectorXd solution;
    std::vector<Point2> map;
    std::vector<Matrix2> jacobian;
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  };

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const PerturbationField& field() const { return sampler_field_; }

  /// Writes the nodal solution at y into `nodal` (size node_count()).
  void solve(const ParameterVector& y, Workspace& ws, std::span<double> nodal) const;
  FemSolution solve(const ParameterVector& y, Workspace& ws) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  PerturbationField sampler_field_;
  ScalarField source_;
  FieldSampler sampler_;
  std::vector<int> dof_;         // node -> interior index or -1
  std::vector<int> interior_;    // interior index -> node
  std::vector<std::array<Point2, 3>> gradients_;
  std::vector<double> areas_;
  std::vector<int> slots_;       // 9 per triangle, index into the value array or -1
  SparseMatrix pattern_;
};

}  // namespace shapeqmc

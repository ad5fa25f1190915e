#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shapeqmc/fem.hpp"
#include "shapeqmc/field.hpp"
#include "shapeqmc/lattice.hpp"
#include "shapeqmc/mesh.hpp"

namespace shapeqmc {

/// Noisy point observations of the forward map with Gaussian noise.
struct Dataset {
  std::vector<Point2> ref_points;
  std::vector<double> delta;
  /// Inverse noise covariance. Gamma = eta^2 I gives I / eta^2; a zero matrix
  /// makes the likelihood flat. Empty when eta = 0.
  Eigen::MatrixXd precision;
  double eta = 0.0;
  double noise_frac = 0.0;
  int s_star = 0;
  int h_star_level = 0;
  std::uint64_t truth_seed = 0;
  std::uint64_t noise_seed = 0;
  std::vector<double> y_star;

  std::size_t size() const { return delta.size(); }
  /// Throws InvalidArgument if sizes disagree or a reference point leaves the disk.
  void validate() const;
};

/// Settings of the synthetic ground truth.
struct DataSpec {
  int s_star = 200;
  int h_star_level = 6;
  double noise_frac = 0.1;
  std::uint64_t truth_seed = 20240601;
  std::uint64_t noise_seed = 20240602;
};

/// Draws y* uniformly from the s*-dimensional box, solves on the fine mesh and
/// perturbs the observations with noise of size noise_frac * max|delta_clean|.
/// `field` must have at least s* modes; it is truncated to s*.
Dataset synthesize_data(const PerturbationField& field, const ScalarField& f, std::vector<Point2> ref_points,
                        const DataSpec& spec);

/// -1/2 (delta - G)^T Gamma^{-1} (delta - G).
double log_likelihood(std::span<const double> observed, const Dataset& data);

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

/// Z and Z' of one cubature rule, both scaled by exp(-log_scale).
struct ShiftEstimate {
  double log_scale = 0.0;            // max log-likelihood over the nodes
  double z_scaled = 0.0;             // Z exp(-log_scale)
  std::vector<double> zprime_scaled; // Z' exp(-log_scale), node-major (x, y) pairs
  std::size_t nodes = 0;

  double z() const;
  /// Z' / Z at every evaluation point.
  std::vector<double> ratio() const;
};

/// Writes the i-th cubature node into y (size s).
using SampleFn = std::function<void(std::size_t, std::span<double>)>;

/// Likelihood-weighted integrand evaluation for one mesh, field and dataset.
///
/// Each cubature node costs one pullback solve. Evaluation runs in two passes
/// (log-likelihoods, then fixed-size block sums reduced pairwise) so results
/// are identical for every thread count.
class PosteriorProblem {
 public:
  /// `eval_points` defaults to the mesh nodes.
  PosteriorProblem(const PerturbationField& field, ScalarField f, int mesh_level, Dataset data,
                   std::vector<Point2> eval_points = {});

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const PerturbationField& field() const { return field_; }
  const Dataset& data() const { return data_; }
  int dimension() const { return field_.dimension(); }
  const std::vector<Point2>& eval_points() const { return eval_points_; }

  /// Forward observation G(y) at the reference points.
  std::vector<double> forward(const ParameterVector& y) const;

  /// Cubature with `count` nodes; equal weights 1/count when `weights` is empty.
  ShiftEstimate estimate(std::size_t count, const SampleFn& sample, std::span<const double> weights,
                         int threads) const;

 private:
  PerturbationField field_;
  std::shared_ptr<const Mesh> mesh_;
  Dataset data_;
  std::vector<Point2> eval_points_;
  std::unique_ptr<ForwardSolver> solver_;
  std::unique_ptr<PointEvaluator> observer_;
  std::unique_ptr<FieldSampler> eval_sampler_;
};

/// Samples per block in the deterministic reduction.
inline constexpr std::size_t kReductionBlock = 64;

/// One shift of a randomly shifted lattice rule.
ShiftEstimate ratio_estimator(const PosteriorProblem& problem, const LatticeRule& rule, int shift_index,
                              int threads);

/// i.i.d. uniform samples keyed by (seed, sample index), split into R equal batches.
std::vector<ShiftEstimate> mc_estimator(const PosteriorProblem& problem, std::size_t n_total, std::uint64_t seed,
                                        int batches, int threads);

/// Mean of per-shift ratio fields.
struct PosteriorEstimate {
  std::vector<double> log_z;                      // per shift
  std::vector<std::vector<double>> ratios;        // per shift, node-major pairs
  std::vector<double> mean_field;
};

/// Throws Error if some Z is not positive.
PosteriorEstimate posterior_mean(std::span<const ShiftEstimate> estimates);

/// Proxy mode (no reference): sqrt(sum_r ||q_r - q_mean||^2 / (R (R-1))).
/// Reference mode: sqrt(sum_r ||q_r - ref||^2 / R). L2 norms of the P1
/// interpolants of the two-component nodal fields on `mesh`.
double rms_error(const Mesh& mesh, std::span<const std::vector<double>> ratios,
                 const std::vector<double>* reference = nullptr);

}  // namespace shapeqmc

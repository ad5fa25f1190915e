#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shapeqmc/bayes.hpp"
#include "shapeqmc/field.hpp"
#include "shapeqmc/lattice.hpp"

namespace shapeqmc {

/// Settings of every study, read from a flat `key = value` file.
struct ExperimentConfig {
  // Field.
  std::string field_kind = "paper-radial";  // or "identity"
  int s = 20;
  double amplitude = 1.2;
  int frequency = 3;
  double decay = 2.1;
  double beta = 2.0;
  double p = 0.49;

  // Discretization and data.
  int mesh_level = 4;
  int s_star = 200;
  int h_star_level = 6;
  int k = 5;
  double ref_radius = 0.5;
  double noise_frac = 0.1;
  std::string dataset_file;  // read instead of synthesizing when set

  // Cubature.
  int R = 8;
  std::vector<std::int64_t> n_list{67, 127, 251, 503, 1009, 2003, 4001};
  std::vector<std::string> methods{"mc", "qmc", "qmc-ots"};
  double alpha = 0.05;
  bool include_c6 = false;
  std::string vector_file;
  bool rms_reference = false;

  std::uint64_t seed_truth = 20240601;
  std::uint64_t seed_noise = 20240602;
  std::uint64_t seed_shifts = 20240603;
  std::uint64_t seed_mc = 20240604;
  std::uint64_t seed_reference = 20240605;

  // Reconstruction.
  std::int64_t reconstruct_n = 4001;
  int boundary_points = 512;

  // Truncation study.
  std::vector<int> trunc_s_list{4, 8, 16, 32};
  int trunc_s_ref = 128;
  std::int64_t trunc_n = 4001;
  int trunc_mesh_level = 4;

  // FEM study.
  std::vector<int> fem_levels{2, 3, 4, 5};
  int fem_ref_level = 7;

  /// Parses the key-value format; unknown keys raise ParseError with the line.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  /// Canonical text form; parse(to_text()) reproduces the config.
  std::string to_text() const;

  /// s = 100, h = 2^-5, n up to 128021.
  void apply_paper_scale();
  /// Throws InvalidArgument naming the offending field.
  void validate() const;

  GevreyProfile profile() const;
  RadialParams radial() const;
  std::vector<Point2> ref_points() const;
};

/// Least-squares line through (log10 x, log10 y); residual is the RMS of the
/// log10 residuals.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Truth field, inference field, dataset and source shared by the studies.
struct ExperimentSetup {
  PerturbationField truth;
  PerturbationField field;
  Dataset data;
  ScalarField source;
};
ExperimentSetup prepare(const ExperimentConfig& config);

/// Bound constants for the configured field and noise level.
ConstantsLedger constants_ledger(const ExperimentConfig& config, const ExperimentSetup& setup);

/// Tailored POD weights for dimension s. The ledger only matters with include_c6.
PodWeights tailored_weights(const ExperimentConfig& config, int s, const ConstantsLedger& ledger = {});

struct ConvergenceRow {
  std::string method;
  std::int64_t n = 0;
  int R = 0;
  double rms_proxy = 0.0;
  std::optional<double> rms_reference;
  double h = 0.0;
  int s = 0;
  int mesh_level = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::vector<std::pair<std::string, SlopeFit>> fits;  // per method, on rms_proxy
  std::vector<std::string> warnings;
};

ConvergenceResult run_convergence(const ExperimentConfig& config, int threads);
/// convergence.csv, convergence_fit.csv and the wall-time sidecar convergence_timing.csv.
void write_convergence(const std::string& dir, const ConvergenceResult& result);

struct ReconstructionResult {
  std::vector<Point2> truth_boundary;
  std::vector<Point2> qmc_boundary;
  std::vector<Point2> mc_boundary;
  double qmc_distance = 0.0;  // L2 distance to the truth polyline over the angle
  double mc_distance = 0.0;
  std::vector<double> qmc_mean_field;  // mesh nodes, node-major pairs
  std::vector<double> mc_mean_field;
  std::shared_ptr<const Mesh> mesh;
};

ReconstructionResult run_reconstruction(const ExperimentConfig& config, std::int64_t n, int threads);
void write_reconstruction(const std::string& dir, const ReconstructionResult& result);

struct TruncationRow {
  int s = 0;
  double error = 0.0;
};

struct TruncationResult {
  std::vector<TruncationRow> rows;  // includes s_ref with error 0
  SlopeFit fit;                     // over trunc_s_list
  double theoretical_slope = 0.0;   // -2/p + 1
  std::int64_t n = 0;
  int s_ref = 0;
};

/// Prior mean of the observations for s in trunc_s_list against s_ref, one
/// CBC lattice for s_ref with the centered shift 1/2.
TruncationResult run_truncation_study(const ExperimentConfig& config, int threads);
void write_truncation(const std::string& dir, const TruncationResult& result);

struct FemRow {
  int level = 0;
  double h = 0.0;
  double analytic_error = 0.0;   // identity field, f = 1, vs (1 - r^2) / 4
  double reference_error = 0.0;  // radial field at a fixed y, vs fem_ref_level
};

struct FemStudyResult {
  std::vector<FemRow> rows;
  std::vector<double> analytic_rates;   // log2(e_l / e_{l+1})
  std::vector<double> reference_rates;
};

FemStudyResult run_fem_study(const ExperimentConfig& config);
void write_fem_study(const std::string& dir, const FemStudyResult& result);

}  // namespace shapeqmc

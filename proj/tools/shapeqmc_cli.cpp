// Experiment driver: convergence, reconstruction, truncation and FEM studies.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "shapeqmc/experiment.hpp"
#include "shapeqmc/parallel.hpp"

using namespace shapeqmc;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = "shapeqmc_out";
  int threads = 0;
  bool paper_scale = false;
  std::int64_t n = 0;
  int s = 0;
  int shifts = 0;
  std::uint64_t seed = 0;
  std::string vector_file;
  double alpha = 0.0;
  double p = 0.0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Key-value experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--paper-scale", o.paper_scale, "s = 100, h = 2^-5, n up to 128021");
  cmd->add_option("--n", o.n, "Lattice size (rounded up to a prime)")->check(CLI::PositiveNumber);
  cmd->add_option("--s", o.s, "Stochastic dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--shifts", o.shifts, "Number of random shifts R")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Seed of the random shifts");
  cmd->add_option("--vector-file", o.vector_file, "Off-the-shelf generating vector")->check(CLI::ExistingFile);
  cmd->add_option("--alpha", o.alpha, "Weight slack alpha in (0, 1/2)");
  cmd->add_option("--p", o.p, "Summability exponent p in (0, 1)");
}

ExperimentConfig build_config(const Options& o, CLI::App* cmd) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  if (o.paper_scale) c.apply_paper_scale();
  if (cmd->count("--s")) c.s = o.s;
  if (cmd->count("--shifts")) c.R = o.shifts;
  if (cmd->count("--seed")) c.seed_shifts = o.seed;
  if (cmd->count("--vector-file")) c.vector_file = o.vector_file;
  if (cmd->count("--alpha")) c.alpha = o.alpha;
  if (cmd->count("--p")) c.p = o.p;
  if (cmd->count("--n")) {
    const std::int64_t n = next_prime(std::max<std::int64_t>(o.n, 2));
    c.n_list = {n};
    c.reconstruct_n = n;
  }
  c.validate();
  return c;
}

int thread_count(const Options& o) { return o.threads > 0 ? o.threads : default_thread_count(); }

void save_config(const std::string& dir, const std::string& name, const ExperimentConfig& c) {
  std::filesystem::create_directories(dir);
  std::ofstream(std::filesystem::path(dir) / name) << c.to_text();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian shape inversion with tailored randomly shifted lattice rules"};
  app.require_subcommand(1);
  Options o;

  auto* convergence = app.add_subcommand("convergence", "rms error versus n for MC and lattice rules");
  auto* reconstruct = app.add_subcommand("reconstruct", "posterior mean domain and its boundary");
  auto* truncation = app.add_subcommand("truncation", "dimension truncation error of the prior mean");
  auto* fem_rate = app.add_subcommand("fem-rate", "finite element convergence in h");
  auto* make_data = app.add_subcommand("make-data", "synthesize the observation dataset");
  auto* cbc = app.add_subcommand("cbc", "construct and export a tailored generating vector");
  for (auto* cmd : {convergence, reconstruct, truncation, fem_rate, make_data, cbc}) add_common(cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (convergence->parsed()) {
      const auto c = build_config(o, convergence);
      const auto result = run_convergence(c, thread_count(o));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      write_convergence(o.out_dir, result);
      save_config(o.out_dir, "convergence_config.txt", c);
      for (const auto& [method, fit] : result.fits)
        std::printf("%-8s slope %+.3f  residual %.3f\n", method.c_str(), fit.slope, fit.residual);
    } else if (reconstruct->parsed()) {
      const auto c = build_config(o, reconstruct);
      const auto result = run_reconstruction(c, c.reconstruct_n, thread_count(o));
      write_reconstruction(o.out_dir, result);
      save_config(o.out_dir, "reconstruct_config.txt", c);
      std::printf("boundary L2 distance: qmc %.4e  mc %.4e\n", result.qmc_distance, result.mc_distance);
    } else if (truncation->parsed()) {
      const auto c = build_config(o, truncation);
      const auto result = run_truncation_study(c, thread_count(o));
      write_truncation(o.out_dir, result);
      save_config(o.out_dir, "truncation_config.txt", c);
      for (const auto& r : result.rows) std::printf("s = %4d  error %.4e\n", r.s, r.error);
      std::printf("slope %+.3f (theory %+.3f)  residual %.3f\n", result.fit.slope, result.theoretical_slope,
                  result.fit.residual);
    } else if (fem_rate->parsed()) {
      const auto c = build_config(o, fem_rate);
      const auto result = run_fem_study(c);
      write_fem_study(o.out_dir, result);
      for (std::size_t i = 0; i < result.analytic_rates.size(); ++i)
        std::printf("levels %d->%d  analytic rate %.3f  reference rate %.3f\n", result.rows[i].level,
                    result.rows[i + 1].level, result.analytic_rates[i], result.reference_rates[i]);
    } else if (make_data->parsed()) {
      const auto c = build_config(o, make_data);
      const auto setup = prepare(c);
      std::filesystem::create_directories(o.out_dir);
      const auto path = (std::filesystem::path(o.out_dir) / "dataset.txt").string();
      write_dataset(path, setup.data);
      std::printf("wrote %s (eta = %.6e)\n", path.c_str(), setup.data.eta);
    } else if (cbc->parsed()) {
      const auto c = build_config(o, cbc);
      const std::int64_t n = c.n_list.back();
      const auto weights = tailored_weights(c, c.s);
      const auto z = cbc_construct(n, c.s, weights);
      std::filesystem::create_directories(o.out_dir);
      const auto path = (std::filesystem::path(o.out_dir) / "generating_vector.txt").string();
      save_generating_vector(path, z);
      const double lambda = choose_lambda(c.p, c.beta, c.alpha);
      std::printf("wrote %s (n = %lld, s = %d)\n", path.c_str(), static_cast<long long>(n), c.s);
      std::printf("shift-averaged worst-case error %.6e, bound %.6e at lambda %.6f\n",
                  shift_averaged_wce(z, n, weights), error_bound(weights, n, lambda), lambda);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

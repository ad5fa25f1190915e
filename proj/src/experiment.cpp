#include "shapeqmc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "shapeqmc/parallel.hpp"

namespace shapeqmc {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? ", " : "") << values[i];
  return out.str();
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw InvalidArgument("config field '" + field + "': " + why);
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<Point2> circle_points(int count) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / count;
    pts.emplace_back(std::cos(phi), std::sin(phi));
  }
  return pts;
}

// Fixed nontrivial parameter for the FEM study.
ParameterVector fem_study_parameter(int s) {
  std::vector<double> y(static_cast<std::size_t>(s));
  for (int j = 0; j < s; ++j) y[static_cast<std::size_t>(j)] = 0.4 * std::cos(1.0 + j);
  return ParameterVector(std::move(y));
}

PerturbationField make_inference_field(const ExperimentConfig& c) {
  if (c.field_kind == "identity") return PerturbationField::identity(c.s, c.profile());
  const auto truth = PerturbationField::paper_radial(c.s_star, c.radial(), c.profile());
  return c.s == c.s_star ? truth : truth.truncate(c.s);
}

std::vector<std::int64_t> off_the_shelf_vector(const ExperimentConfig& c, std::int64_t n) {
  auto z = load_generating_vector(c.vector_file, c.s);
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] %= n;
    if (z[j] == 0)
      throw InvalidArgument("vector_file: coordinate " + std::to_string(j + 1) + " is divisible by n = " +
                            std::to_string(n));
  }
  return z;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(where + ": expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_double = [&]() {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) throw ParseError(where + ": '" + key + "' expects a number");
      return v;
    };
    auto as_int = [&]() -> long long {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) throw ParseError(where + ": '" + key + "' expects an integer");
      return v;
    };
    auto as_seed = [&]() -> std::uint64_t {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) throw ParseError(where + ": '" + key + "' expects an unsigned integer");
      return v;
    };
    auto as_bool = [&]() {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw ParseError(where + ": '" + key + "' expects true or false");
    };
    auto as_int_list = [&]() {
      std::vector<long long> out;
      for (const auto& item : split_list(value)) {
        std::size_t used = 0;
        long long v = 0;
        try {
          v = std::stoll(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != item.size()) throw ParseError(where + ": '" + key + "' expects integers");
        out.push_back(v);
      }
      return out;
    };

    if (key == "field_kind") c.field_kind = value;
    else if (key == "s") c.s = static_cast<int>(as_int());
    else if (key == "amplitude") c.amplitude = as_double();
    else if (key == "frequency") c.frequency = static_cast<int>(as_int());
    else if (key == "decay") c.decay = as_double();
    else if (key == "beta") c.beta = as_double();
    else if (key == "p") c.p = as_double();
    else if (key == "mesh_level") c.mesh_level = static_cast<int>(as_int());
    else if (key == "s_star") c.s_star = static_cast<int>(as_int());
    else if (key == "h_star_level") c.h_star_level = static_cast<int>(as_int());
    else if (key == "k") c.k = static_cast<int>(as_int());
    else if (key == "ref_radius") c.ref_radius = as_double();
    else if (key == "noise_frac") c.noise_frac = as_double();
    else if (key == "dataset_file") c.dataset_file = value;
    else if (key == "R") c.R = static_cast<int>(as_int());
    else if (key == "n_list") {
      c.n_list.clear();
      for (auto v : as_int_list()) c.n_list.push_back(v);
    } else if (key == "methods") c.methods = split_list(value);
    else if (key == "alpha") c.alpha = as_double();
    else if (key == "include_c6") c.include_c6 = as_bool();
    else if (key == "vector_file") c.vector_file = value;
    else if (key == "rms_reference") c.rms_reference = as_bool();
    else if (key == "seed_truth") c.seed_truth = as_seed();
    else if (key == "seed_noise") c.seed_noise = as_seed();
    else if (key == "seed_shifts") c.seed_shifts = as_seed();
    else if (key == "seed_mc") c.seed_mc = as_seed();
    else if (key == "seed_reference") c.seed_reference = as_seed();
    else if (key == "reconstruct_n") c.reconstruct_n = as_int();
    else if (key == "boundary_points") c.boundary_points = static_cast<int>(as_int());
    else if (key == "trunc_s_list") {
      c.trunc_s_list.clear();
      for (auto v : as_int_list()) c.trunc_s_list.push_back(static_cast<int>(v));
    } else if (key == "trunc_s_ref") c.trunc_s_ref = static_cast<int>(as_int());
    else if (key == "trunc_n") c.trunc_n = as_int();
    else if (key == "trunc_mesh_level") c.trunc_mesh_level = static_cast<int>(as_int());
    else if (key == "fem_levels") {
      c.fem_levels.clear();
      for (auto v : as_int_list()) c.fem_levels.push_back(static_cast<int>(v));
    } else if (key == "fem_ref_level") c.fem_ref_level = static_cast<int>(as_int());
    else throw ParseError(where + ": unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  out << "field_kind = " << field_kind << '\n'
      << "s = " << s << '\n'
      << "amplitude = " << num(amplitude) << '\n'
      << "frequency = " << frequency << '\n'
      << "decay = " << num(decay) << '\n'
      << "beta = " << num(beta) << '\n'
      << "p = " << num(p) << '\n'
      << "mesh_level = " << mesh_level << '\n'
      << "s_star = " << s_star << '\n'
      << "h_star_level = " << h_star_level << '\n'
      << "k = " << k << '\n'
      << "ref_radius = " << num(ref_radius) << '\n'
      << "noise_frac = " << num(noise_frac) << '\n'
      << "dataset_file = " << dataset_file << '\n'
      << "R = " << R << '\n'
      << "n_list = " << join(n_list) << '\n'
      << "methods = " << join(methods) << '\n'
      << "alpha = " << num(alpha) << '\n'
      << "include_c6 = " << (include_c6 ? "true" : "false") << '\n'
      << "vector_file = " << vector_file << '\n'
      << "rms_reference = " << (rms_reference ? "true" : "false") << '\n'
      << "seed_truth = " << seed_truth << '\n'
      << "seed_noise = " << seed_noise << '\n'
      << "seed_shifts = " << seed_shifts << '\n'
      << "seed_mc = " << seed_mc << '\n'
      << "seed_reference = " << seed_reference << '\n'
      << "reconstruct_n = " << reconstruct_n << '\n'
      << "boundary_points = " << boundary_points << '\n'
      << "trunc_s_list = " << join(trunc_s_list) << '\n'
      << "trunc_s_ref = " << trunc_s_ref << '\n'
      << "trunc_n = " << trunc_n << '\n'
      << "trunc_mesh_level = " << trunc_mesh_level << '\n'
      << "fem_levels = " << join(fem_levels) << '\n'
      << "fem_ref_level = " << fem_ref_level << '\n';
  return out.str();
}

void ExperimentConfig::apply_paper_scale() {
  s = 100;
  mesh_level = 5;
  n_list.clear();
  for (std::int64_t target : {67, 127, 251, 503, 1009, 2003, 4001, 8009, 16007, 32003, 64007, 128021})
    n_list.push_back(next_prime(target));
  reconstruct_n = n_list.back();
}

void ExperimentConfig::validate() const {
  if (field_kind != "paper-radial" && field_kind != "identity")
    bad_field("field_kind", "expected paper-radial or identity, got '" + field_kind + "'");
  if (s < 1) bad_field("s", "must be >= 1");
  if (s_star < s) bad_field("s_star", "must be >= s");
  if (!(amplitude >= 0.0)) bad_field("amplitude", "must be nonnegative");
  if (frequency < 1) bad_field("frequency", "must be >= 1");
  if (!(decay > 1.0)) bad_field("decay", "must exceed 1");
  if (!(beta >= 1.0)) bad_field("beta", "must be >= 1");
  if (!(p > 0.0 && p < 1.0)) bad_field("p", "must lie in (0, 1)");
  if (!(decay * p > 1.0)) bad_field("p", "b_j = j^-decay is not p-summable");
  if (mesh_level < 0) bad_field("mesh_level", "must be >= 0");
  if (h_star_level < mesh_level) bad_field("h_star_level", "must be >= mesh_level");
  if (k < 1) bad_field("k", "must be >= 1");
  if (!(ref_radius >= 0.0 && ref_radius < 1.0)) bad_field("ref_radius", "must lie in [0, 1)");
  if (!(noise_frac > 0.0)) bad_field("noise_frac", "must be positive");
  if (R < 2) bad_field("R", "must be >= 2");
  if (n_list.empty()) bad_field("n_list", "is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (!is_prime(n_list[i])) bad_field("n_list", std::to_string(n_list[i]) + " is not prime");
    if (i > 0 && n_list[i] <= n_list[i - 1]) bad_field("n_list", "must be strictly increasing");
  }
  if (methods.empty()) bad_field("methods", "is empty");
  for (const auto& m : methods)
    if (m != "mc" && m != "qmc" && m != "qmc-ots") bad_field("methods", "unknown method '" + m + "'");
  if (!(alpha > 0.0 && alpha < 0.5)) bad_field("alpha", "must lie in (0, 1/2)");
  try {
    (void)choose_lambda(p, beta, alpha);
  } catch (const InvalidArgument& e) {
    bad_field("p", e.what());
  }
  if (!is_prime(reconstruct_n)) bad_field("reconstruct_n", "must be prime");
  if (boundary_points < 3) bad_field("boundary_points", "must be >= 3");
  if (trunc_s_list.empty()) bad_field("trunc_s_list", "is empty");
  for (int v : trunc_s_list)
    if (v < 1 || v > trunc_s_ref) bad_field("trunc_s_list", "entries must lie in [1, trunc_s_ref]");
  if (!is_prime(trunc_n)) bad_field("trunc_n", "must be prime");
  if (trunc_mesh_level < 0) bad_field("trunc_mesh_level", "must be >= 0");
  if (fem_levels.size() < 2) bad_field("fem_levels", "needs at least two levels");
  for (std::size_t i = 0; i < fem_levels.size(); ++i) {
    if (fem_levels[i] < 0) bad_field("fem_levels", "levels must be >= 0");
    if (i > 0 && fem_levels[i] != fem_levels[i - 1] + 1) bad_field("fem_levels", "levels must be consecutive");
  }
  if (fem_ref_level <= fem_levels.back()) bad_field("fem_ref_level", "must exceed every fem level");
}

GevreyProfile ExperimentConfig::profile() const {
  GevreyProfile g;
  g.beta = beta;
  g.b_scale = 1.0;
  g.b_decay = decay;
  g.p = p;
  return g;
}

RadialParams ExperimentConfig::radial() const { return RadialParams{amplitude, frequency, decay}; }

std::vector<Point2> ExperimentConfig::ref_points() const {
  std::vector<Point2> pts;
  for (int i = 0; i < k; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / k;
    pts.emplace_back(ref_radius * std::cos(phi), ref_radius * std::sin(phi));
  }
  return pts;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit_loglog: need at least two points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("fit_loglog: values must be positive");
    lx.push_back(std::log10(x[i]));
    ly.push_back(std::log10(y[i]));
  }
  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_loglog: x values are all equal");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

ExperimentSetup prepare(const ExperimentConfig& config) {
  config.validate();
  ExperimentSetup setup{
      config.field_kind == "identity"
          ? PerturbationField::identity(config.s_star, config.profile())
          : PerturbationField::paper_radial(config.s_star, config.radial(), config.profile()),
      make_inference_field(config), Dataset{}, paper_source()};
  if (!config.dataset_file.empty()) {
    setup.data = read_dataset(config.dataset_file);
  } else {
    DataSpec spec;
    spec.s_star = config.s_star;
    spec.h_star_level = config.h_star_level;
    spec.noise_frac = config.noise_frac;
    spec.truth_seed = config.seed_truth;
    spec.noise_seed = config.seed_noise;
    setup.data = synthesize_data(setup.truth, setup.source, config.ref_points(), spec);
  }
  return setup;
}

ConstantsLedger constants_ledger(const ExperimentConfig& config, const ExperimentSetup& setup) {
  const auto [smin, smax] = singular_value_bounds(setup.field, 10000, config.seed_truth);
  ConstantsLedger::Inputs in;
  in.profile = config.profile();
  in.sigma_min = std::min(smin, 1.0);
  in.sigma_max = std::max(smax, 1.0);
  in.tau_min = setup.data.eta * setup.data.eta;
  in.observations = static_cast<int>(setup.data.size());
  return ConstantsLedger::compute(in);
}

PodWeights tailored_weights(const ExperimentConfig& config, int s, const ConstantsLedger& ledger) {
  const double lambda = choose_lambda(config.p, config.beta, config.alpha);
  return pod_weights(config.profile(), lambda, s, config.include_c6, ledger, config.alpha);
}

ConvergenceResult run_convergence(const ExperimentConfig& config, int threads) {
  const auto setup = prepare(config);
  const PosteriorProblem problem(setup.field, setup.source, config.mesh_level, setup.data);
  const Mesh& mesh = problem.mesh();
  const ConstantsLedger ledger = config.include_c6 ? constants_ledger(config, setup) : ConstantsLedger{};
  const PodWeights weights = tailored_weights(config, config.s, ledger);
  ConvergenceResult result;

  auto lattice_estimates = [&](const std::vector<std::int64_t>& z, std::int64_t n, std::uint64_t seed) {
    const LatticeRule rule(n, z, config.R, seed);
    std::vector<ShiftEstimate> est;
    for (int r = 0; r < config.R; ++r) est.push_back(ratio_estimator(problem, rule, r, threads));
    return est;
  };

  std::optional<std::vector<double>> reference;
  if (config.rms_reference) {
    const std::int64_t n = config.n_list.back();
    const auto est = lattice_estimates(cbc_construct(n, config.s, weights), n, config.seed_reference);
    reference = posterior_mean(est).mean_field;
  }

  for (const auto& method : config.methods) {
    if (method == "qmc-ots" && config.vector_file.empty()) {
      result.warnings.push_back("method qmc-ots skipped: no vector_file given");
      continue;
    }
    std::vector<double> ns, errs;
    for (const std::int64_t n : config.n_list) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<ShiftEstimate> est;
      ConvergenceRow row;
      row.method = method;
      if (method == "mc") {
        est = mc_estimator(problem, static_cast<std::size_t>(n) * static_cast<std::size_t>(config.R), config.seed_mc,
                           config.R, threads);
        row.seed = config.seed_mc;
      } else {
        const auto z = method == "qmc" ? cbc_construct(n, config.s, weights) : off_the_shelf_vector(config, n);
        est = lattice_estimates(z, n, config.seed_shifts);
        row.seed = config.seed_shifts;
      }
      const auto post = posterior_mean(est);
      row.n = n;
      row.R = config.R;
      row.rms_proxy = rms_error(mesh, post.ratios);
      if (reference) row.rms_reference = rms_error(mesh, post.ratios, &*reference);
      row.h = mesh.h;
      row.s = config.s;
      row.mesh_level = config.mesh_level;
      row.wall_seconds = elapsed_seconds(start);
      ns.push_back(static_cast<double>(n));
      errs.push_back(row.rms_proxy);
      result.rows.push_back(row);
    }
    if (ns.size() >= 2) result.fits.emplace_back(method, fit_loglog(ns, errs));
  }
  return result;
}

void write_convergence(const std::string& dir, const ConvergenceResult& result) {
  auto csv = open_output(dir, "convergence.csv");
  csv << "# shapeqmc convergence v1; estimator=mean of per-shift ratios; rms_proxy=standard error over shifts\n";
  csv << "method,n,R,rms_proxy,rms_vs_reference,h,s,mesh_level,seed\n";
  for (const auto& r : result.rows) {
    csv << r.method << ',' << r.n << ',' << r.R << ',' << sci(r.rms_proxy) << ','
        << (r.rms_reference ? sci(*r.rms_reference) : "") << ',' << sci(r.h) << ',' << r.s << ',' << r.mesh_level
        << ',' << r.seed << '\n';
  }
  auto fit = open_output(dir, "convergence_fit.csv");
  fit << "method,slope,intercept,residual\n";
  for (const auto& [method, f] : result.fits)
    fit << method << ',' << sci(f.slope) << ',' << sci(f.intercept) << ',' << sci(f.residual) << '\n';
  auto timing = open_output(dir, "convergence_timing.csv");
  timing << "method,n,wall_time_seconds\n";
  for (const auto& r : result.rows) timing << r.method << ',' << r.n << ',' << sci(r.wall_seconds) << '\n';
}

ReconstructionResult run_reconstruction(const ExperimentConfig& config, std::int64_t n, int threads) {
  if (!is_prime(n)) throw InvalidArgument("reconstruction: n must be prime");
  const auto setup = prepare(config);
  ReconstructionResult result;
  result.mesh = std::make_shared<const Mesh>(build_disk_mesh(config.mesh_level));
  const auto circle = circle_points(config.boundary_points);
  std::vector<Point2> eval = result.mesh->nodes;
  eval.insert(eval.end(), circle.begin(), circle.end());
  const PosteriorProblem problem(setup.field, setup.source, config.mesh_level, setup.data, eval);
  const std::size_t nodes = result.mesh->node_count();

  const ConstantsLedger ledger = config.include_c6 ? constants_ledger(config, setup) : ConstantsLedger{};
  const LatticeRule rule(n, cbc_construct(n, config.s, tailored_weights(config, config.s, ledger)), config.R,
                         config.seed_shifts);
  std::vector<ShiftEstimate> qmc;
  for (int r = 0; r < config.R; ++r) qmc.push_back(ratio_estimator(problem, rule, r, threads));
  const auto mc = mc_estimator(problem, static_cast<std::size_t>(n) * static_cast<std::size_t>(config.R),
                               config.seed_mc, config.R, threads);
  const auto qmc_mean = posterior_mean(qmc).mean_field;
  const auto mc_mean = posterior_mean(mc).mean_field;

  result.qmc_mean_field.assign(qmc_mean.begin(), qmc_mean.begin() + static_cast<std::ptrdiff_t>(2 * nodes));
  result.mc_mean_field.assign(mc_mean.begin(), mc_mean.begin() + static_cast<std::ptrdiff_t>(2 * nodes));
  const ParameterVector y_star(setup.data.y_star);
  const bool truth_known = static_cast<int>(setup.data.y_star.size()) == setup.truth.dimension();
  double dq = 0.0, dm = 0.0;
  for (std::size_t i = 0; i < circle.size(); ++i) {
    const std::size_t at = 2 * (nodes + i);
    result.qmc_boundary.emplace_back(qmc_mean[at], qmc_mean[at + 1]);
    result.mc_boundary.emplace_back(mc_mean[at], mc_mean[at + 1]);
    const Point2 t = truth_known ? setup.truth.evaluate_map(circle[i], y_star) : circle[i];
    result.truth_boundary.push_back(t);
    dq += (result.qmc_boundary.back() - t).squaredNorm();
    dm += (result.mc_boundary.back() - t).squaredNorm();
  }
  const double dphi = 2.0 * std::numbers::pi / static_cast<double>(circle.size());
  result.qmc_distance = std::sqrt(dq * dphi);
  result.mc_distance = std::sqrt(dm * dphi);
  return result;
}

void write_reconstruction(const std::string& dir, const ReconstructionResult& result) {
  auto polyline = [&](const std::string& name, const std::vector<Point2>& pts) {
    auto out = open_output(dir, name);
    for (const auto& p : pts) out << num(p[0]) << ' ' << num(p[1]) << '\n';
  };
  polyline("boundary_truth.txt", result.truth_boundary);
  polyline("boundary_qmc.txt", result.qmc_boundary);
  polyline("boundary_mc.txt", result.mc_boundary);
  const std::size_t nodes = result.mesh->node_count();
  std::vector<std::vector<double>> columns(4, std::vector<double>(nodes));
  for (std::size_t i = 0; i < nodes; ++i) {
    columns[0][i] = result.qmc_mean_field[2 * i];
    columns[1][i] = result.qmc_mean_field[2 * i + 1];
    columns[2][i] = result.mc_mean_field[2 * i];
    columns[3][i] = result.mc_mean_field[2 * i + 1];
  }
  auto mesh_out = open_output(dir, "posterior_mean_mesh.txt");
  mesh_out << "# columns: x y boundary qmc_mean_x qmc_mean_y mc_mean_x mc_mean_y\n";
  write_mesh(mesh_out, *result.mesh, columns);
  auto summary = open_output(dir, "reconstruction_summary.txt");
  summary << "qmc_boundary_l2_distance " << sci(result.qmc_distance) << '\n';
  summary << "mc_boundary_l2_distance " << sci(result.mc_distance) << '\n';
}

TruncationResult run_truncation_study(const ExperimentConfig& config, int threads) {
  config.validate();
  if (config.field_kind != "paper-radial") throw InvalidArgument("truncation study needs a paper-radial field");
  const int s_ref = config.trunc_s_ref;
  const std::int64_t n = config.trunc_n;
  const auto ref_field = PerturbationField::paper_radial(s_ref, config.radial(), config.profile());
  const LatticeRule rule(n, cbc_construct(n, s_ref, tailored_weights(config, s_ref)),
                         std::vector<std::vector<double>>{std::vector<double>(static_cast<std::size_t>(s_ref), 0.5)});
  auto mesh = std::make_shared<const Mesh>(build_disk_mesh(config.trunc_mesh_level));
  const auto ref_points = config.ref_points();
  const PointEvaluator observer(*mesh, ref_points);
  const ScalarField f = paper_source();

  std::vector<int> dims = config.trunc_s_list;
  dims.push_back(s_ref);
  std::vector<std::unique_ptr<ForwardSolver>> solvers;
  for (int s : dims) solvers.push_back(std::make_unique<ForwardSolver>(mesh, s == s_ref ? ref_field : ref_field.truncate(s), f));

  const std::size_t k = ref_points.size();
  const std::size_t count = static_cast<std::size_t>(n);
  // obs[d][c * count + l]: observation c of dimension d at node l.
  std::vector<std::vector<double>> obs(dims.size(), std::vector<double>(k * count));
  const int workers = std::max(1, threads);
  std::vector<std::vector<std::unique_ptr<ForwardSolver::Workspace>>> ws(static_cast<std::size_t>(workers));
  for (auto& per_worker : ws)
    for (const auto& solver : solvers) per_worker.push_back(std::make_unique<ForwardSolver::Workspace>(*solver));
  std::vector<std::vector<double>> u(static_cast<std::size_t>(workers), std::vector<double>(mesh->node_count()));
  std::vector<std::vector<double>> y(static_cast<std::size_t>(workers), std::vector<double>(static_cast<std::size_t>(s_ref)));
  parallel_for(count, workers, [&](std::size_t l, int w) {
    auto& yw = y[static_cast<std::size_t>(w)];
    auto& uw = u[static_cast<std::size_t>(w)];
    rule.point(static_cast<std::int64_t>(l), 0, yw);
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const std::vector<double> head(yw.begin(), yw.begin() + dims[d]);
      solvers[d]->solve(ParameterVector(head), *ws[static_cast<std::size_t>(w)][d], uw);
      const auto g = observer.apply(uw);
      for (std::size_t c = 0; c < k; ++c) obs[d][c * count + l] = g[c];
    }
  });
  std::vector<std::vector<double>> mean(dims.size(), std::vector<double>(k));
  for (std::size_t d = 0; d < dims.size(); ++d)
    for (std::size_t c = 0; c < k; ++c)
      mean[d][c] = pairwise_sum(std::span<const double>(obs[d]).subspan(c * count, count)) / static_cast<double>(n);

  TruncationResult result;
  result.n = n;
  result.s_ref = s_ref;
  result.theoretical_slope = -2.0 / config.p + 1.0;
  const auto& ref = mean.back();
  std::vector<double> xs, es;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    double sq = 0.0;
    for (std::size_t c = 0; c < k; ++c) sq += (mean[d][c] - ref[c]) * (mean[d][c] - ref[c]);
    result.rows.push_back({dims[d], std::sqrt(sq)});
    if (d + 1 < dims.size()) {
      xs.push_back(dims[d]);
      es.push_back(std::sqrt(sq));
    }
  }
  if (xs.size() >= 2) result.fit = fit_loglog(xs, es);
  return result;
}

void write_truncation(const std::string& dir, const TruncationResult& result) {
  auto csv = open_output(dir, "truncation.csv");
  csv << "# shapeqmc truncation v1; n=" << result.n << "; s_ref=" << result.s_ref << '\n';
  csv << "s,error\n";
  for (const auto& r : result.rows) csv << r.s << ',' << sci(r.error) << '\n';
  auto fit = open_output(dir, "truncation_fit.csv");
  fit << "slope,intercept,residual,theoretical_slope\n";
  fit << sci(result.fit.slope) << ',' << sci(result.fit.intercept) << ',' << sci(result.fit.residual) << ','
      << sci(result.theoretical_slope) << '\n';
}

namespace {

// ||u_coarse - u_fine||_{L2(D_coarse)} with u_fine located on its own mesh.
double l2_distance(const Mesh& coarse, std::span<const double> uc, const Mesh& fine, std::span<const double> uf) {
  const auto qp = quadrature_points(coarse);
  const auto fine_values = PointEvaluator(fine, qp).apply(uf);
  double sum = 0.0;
  for (std::size_t t = 0; t < coarse.triangle_count(); ++t) {
    const auto& tri = coarse.triangles[t];
    const double w = TriangleQuadrature::weight * coarse.area(t);
    for (int q = 0; q < TriangleQuadrature::size; ++q) {
      double v = 0.0;
      for (int a = 0; a < 3; ++a) v += TriangleQuadrature::bary[q][a] * uc[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
      const double d = v - fine_values[3 * t + static_cast<std::size_t>(q)];
      sum += w * d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace

FemStudyResult run_fem_study(const ExperimentConfig& config) {
  config.validate();
  const auto field = make_inference_field(config);
  const auto y = fem_study_parameter(field.dimension());
  const ScalarField f = paper_source();
  const auto identity = PerturbationField::identity(1);
  const auto y0 = ParameterVector::constant(1, 0.0);
  const ScalarField exact = [](const Point2& x) { return 0.25 * (1.0 - x.squaredNorm()); };

  auto solve_on = [](std::shared_ptr<const Mesh> mesh, const PerturbationField& fld, const ScalarField& src,
                     const ParameterVector& yy) {
    ForwardSolver solver(mesh, fld, src);
    ForwardSolver::Workspace ws(solver);
    return solver.solve(yy, ws);
  };

  auto ref_mesh = std::make_shared<const Mesh>(build_disk_mesh(config.fem_ref_level));
  const auto reference = solve_on(ref_mesh, field, f, y);

  FemStudyResult result;
  for (int level : config.fem_levels) {
    auto mesh = std::make_shared<const Mesh>(build_disk_mesh(level));
    FemRow row;
    row.level = level;
    row.h = mesh->h;
    row.analytic_error = l2_error(solve_on(mesh, identity, constant_source(1.0), y0), exact);
    const auto u = solve_on(mesh, field, f, y);
    row.reference_error = l2_distance(*mesh, u.coefficients(), *ref_mesh, reference.coefficients());
    result.rows.push_back(row);
  }
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    result.analytic_rates.push_back(std::log2(result.rows[i - 1].analytic_error / result.rows[i].analytic_error));
    result.reference_rates.push_back(std::log2(result.rows[i - 1].reference_error / result.rows[i].reference_error));
  }
  return result;
}

void write_fem_study(const std::string& dir, const FemStudyResult& result) {
  auto csv = open_output(dir, "fem_rate.csv");
  csv << "# shapeqmc fem-rate v1\n";
  csv << "level,h,analytic_error,analytic_rate,reference_error,reference_rate\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    csv << r.level << ',' << sci(r.h) << ',' << sci(r.analytic_error) << ','
        << (i > 0 ? sci(result.analytic_rates[i - 1]) : "") << ',' << sci(r.reference_error) << ','
        << (i > 0 ? sci(result.reference_rates[i - 1]) : "") << '\n';
  }
}

}  // namespace shapeqmc

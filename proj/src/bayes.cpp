#include "shapeqmc/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "shapeqmc/parallel.hpp"
#include "shapeqmc/rng.hpp"

namespace shapeqmc {

namespace {

// Box-Muller on the counter stream; portable, unlike std::normal_distribution.
double standard_normal(std::mt19937_64& gen) {
  double u1 = uniform01(gen);
  while (u1 <= 0.0) u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw ParseError(where + ": invalid number '" + text + "'");
  return v;
}

}  // namespace

void Dataset::validate() const {
  if (ref_points.size() != delta.size()) throw InvalidArgument("dataset: ref_points and delta differ in length");
  if (ref_points.empty()) throw InvalidArgument("dataset: no observations");
  for (const auto& x : ref_points)
    if (!(x.norm() < 1.0)) throw InvalidArgument("dataset: reference point outside the open unit disk");
  if (precision.size() != 0 &&
      (precision.rows() != static_cast<Eigen::Index>(size()) || precision.cols() != precision.rows()))
    throw InvalidArgument("dataset: precision matrix has the wrong shape");
  if (eta < 0.0) throw InvalidArgument("dataset: eta must be nonnegative");
}

Dataset synthesize_data(const PerturbationField& field, const ScalarField& f, std::vector<Point2> ref_points,
                        const DataSpec& spec) {
  if (spec.s_star < 1) throw InvalidArgument("s_star must be >= 1");
  if (spec.noise_frac < 0.0) throw InvalidArgument("noise_frac must be nonnegative");
  if (field.dimension() < spec.s_star) throw InvalidArgument("truth field has fewer than s_star parameters");
  for (const auto& x : ref_points)
    if (!(x.norm() < 1.0)) throw InvalidArgument("reference points must lie strictly inside the unit disk");
  const PerturbationField truth = field.dimension() == spec.s_star ? field : field.truncate(spec.s_star);

  Dataset data;
  data.ref_points = std::move(ref_points);
  data.noise_frac = spec.noise_frac;
  data.s_star = spec.s_star;
  data.h_star_level = spec.h_star_level;
  data.truth_seed = spec.truth_seed;
  data.noise_seed = spec.noise_seed;

  auto truth_gen = make_stream(spec.truth_seed, 0);
  data.y_star.resize(static_cast<std::size_t>(spec.s_star));
  for (auto& v : data.y_star) v = uniform01(truth_gen) - 0.5;

  const auto clean = observation(truth, ParameterVector(data.y_star), spec.h_star_level, f, data.ref_points);
  double peak = 0.0;
  for (double v : clean) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) throw Error("synthesize_data: the clean observations are identically zero");
  data.eta = spec.noise_frac * peak;

  data.delta = clean;
  if (data.eta > 0.0) {
    auto noise_gen = make_stream(spec.noise_seed, 1);
    for (auto& v : data.delta) v += data.eta * standard_normal(noise_gen);
    const auto k = static_cast<Eigen::Index>(data.size());
    data.precision = Eigen::MatrixXd::Identity(k, k) / (data.eta * data.eta);
  }
  return data;
}

double log_likelihood(std::span<const double> observed, const Dataset& data) {
  if (observed.size() != data.size()) throw InvalidArgument("log_likelihood: observation length mismatch");
  if (data.precision.size() == 0) throw InvalidArgument("log_likelihood: dataset has no noise model (eta = 0)");
  const auto k = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd r(k);
  for (Eigen::Index i = 0; i < k; ++i)
    r[i] = data.delta[static_cast<std::size_t>(i)] - observed[static_cast<std::size_t>(i)];
  const double quad = r.dot(data.precision * r);
  const double value = -0.5 * quad;
  if (!(value <= 0.0)) throw Error("log_likelihood: precision matrix is not positive semidefinite");
  return value;
}

void write_dataset(const std::string& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path);
  out << "# shapeqmc dataset\n";
  out << "k " << data.size() << '\n';
  out << "eta " << fmt17(data.eta) << '\n';
  out << "noise_frac " << fmt17(data.noise_frac) << '\n';
  out << "s_star " << data.s_star << '\n';
  out << "h_star_level " << data.h_star_level << '\n';
  out << "truth_seed " << data.truth_seed << '\n';
  out << "noise_seed " << data.noise_seed << '\n';
  out << "y_star";
  for (double v : data.y_star) out << ' ' << fmt17(v);
  out << '\n';
  out << "points\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    out << fmt17(data.ref_points[i][0]) << ' ' << fmt17(data.ref_points[i][1]) << ' ' << fmt17(data.delta[i])
        << '\n';
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path);
  Dataset data;
  long long k = -1;
  bool in_points = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::vector<std::string> fields;
    for (std::string tok; tokens >> tok;) fields.push_back(tok);
    if (fields.empty()) continue;
    if (in_points) {
      if (fields.size() != 3) throw ParseError(where + ": expected `x1 x2 delta`");
      data.ref_points.emplace_back(parse_double(fields[0], where), parse_double(fields[1], where));
      data.delta.push_back(parse_double(fields[2], where));
      continue;
    }
    const std::string& key = fields[0];
    auto single = [&]() -> const std::string& {
      if (fields.size() != 2) throw ParseError(where + ": key '" + key + "' takes one value");
      return fields[1];
    };
    if (key == "points") {
      in_points = true;
    } else if (key == "k") {
      k = static_cast<long long>(parse_double(single(), where));
    } else if (key == "eta") {
      data.eta = parse_double(single(), where);
    } else if (key == "noise_frac") {
      data.noise_frac = parse_double(single(), where);
    } else if (key == "s_star") {
      data.s_star = static_cast<int>(parse_double(single(), where));
    } else if (key == "h_star_level") {
      data.h_star_level = static_cast<int>(parse_double(single(), where));
    } else if (key == "truth_seed") {
      data.truth_seed = std::stoull(single());
    } else if (key == "noise_seed") {
      data.noise_seed = std::stoull(single());
    } else if (key == "y_star") {
      for (std::size_t i = 1; i < fields.size(); ++i) data.y_star.push_back(parse_double(fields[i], where));
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  if (k < 0) throw ParseError(path + ": missing k");
  if (static_cast<long long>(data.size()) != k)
    throw ParseError(path + ": header says k = " + std::to_string(k) + " but " + std::to_string(data.size()) +
                     " points follow");
  if (data.eta > 0.0)
    data.precision = Eigen::MatrixXd::Identity(k, k) / (data.eta * data.eta);
  data.validate();
  return data;
}

double ShiftEstimate::z() const { return std::exp(log_scale) * z_scaled; }

std::vector<double> ShiftEstimate::ratio() const {
  if (!(z_scaled > 0.0)) throw Error("ratio: normalizing constant is not positive (likelihood underflow)");
  std::vector<double> q(zprime_scaled.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = zprime_scaled[i] / z_scaled;
  return q;
}

PosteriorProblem::PosteriorProblem(const PerturbationField& field, ScalarField f, int mesh_level, Dataset data,
                                   std::vector<Point2> eval_points)
    : field_(field),
      mesh_(std::make_shared<const Mesh>(build_disk_mesh(mesh_level))),
      data_(std::move(data)),
      eval_points_(std::move(eval_points)) {
  data_.validate();
  if (data_.precision.size() == 0) throw InvalidArgument("posterior: dataset has no noise model (eta = 0)");
  if (eval_points_.empty()) eval_points_ = mesh_->nodes;
  solver_ = std::make_unique<ForwardSolver>(mesh_, field_, std::move(f));
  observer_ = std::make_unique<PointEvaluator>(*mesh_, data_.ref_points);
  eval_sampler_ = std::make_unique<FieldSampler>(field_, eval_points_);
}

std::vector<double> PosteriorProblem::forward(const ParameterVector& y) const {
  ForwardSolver::Workspace ws(*solver_);
  std::vector<double> u(mesh_->node_count());
  solver_->solve(y, ws, u);
  return observer_->apply(u);
}

ShiftEstimate PosteriorProblem::estimate(std::size_t count, const SampleFn& sample, std::span<const double> weights,
                                         int threads) const {
  if (count == 0) throw InvalidArgument("estimate: need at least one cubature node");
  if (!weights.empty() && weights.size() != count) throw InvalidArgument("estimate: weight count mismatch");
  const int s = dimension();
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));

  // Pass 1: log-likelihood per node.
  std::vector<double> loglik(count);
  {
    std::vector<std::unique_ptr<ForwardSolver::Workspace>> ws;
    std::vector<std::vector<double>> u(static_cast<std::size_t>(workers), std::vector<double>(mesh_->node_count()));
    std::vector<std::vector<double>> y(static_cast<std::size_t>(workers), std::vector<double>(static_cast<std::size_t>(s)));
    for (int w = 0; w < workers; ++w) ws.push_back(std::make_unique<ForwardSolver::Workspace>(*solver_));
    parallel_for(count, workers, [&](std::size_t i, int w) {
      auto& yw = y[static_cast<std::size_t>(w)];
      sample(i, yw);
      auto& uw = u[static_cast<std::size_t>(w)];
      solver_->solve(ParameterVector(yw), *ws[static_cast<std::size_t>(w)], uw);
      loglik[i] = log_likelihood(observer_->apply(uw), data_);
    });
  }
  const double log_scale = *std::max_element(loglik.begin(), loglik.end());
  if (!std::isfinite(log_scale)) throw Error("estimate: log-likelihood is not finite");

  // Pass 2: block sums of w and w V in index order, then a pairwise reduction over blocks.
  const std::size_t points = eval_points_.size();
  const std::size_t blocks = (count + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> block_z(blocks);
  std::vector<std::vector<double>> block_zp(blocks, std::vector<double>(2 * points));
  {
    std::vector<std::vector<Point2>> map(static_cast<std::size_t>(workers), std::vector<Point2>(points));
    std::vector<std::vector<double>> y(static_cast<std::size_t>(workers), std::vector<double>(static_cast<std::size_t>(s)));
    parallel_for(blocks, workers, [&](std::size_t b, int w) {
      auto& yw = y[static_cast<std::size_t>(w)];
      auto& mw = map[static_cast<std::size_t>(w)];
      auto& zp = block_zp[b];
      double z = 0.0;
      const std::size_t end = std::min(count, (b + 1) * kReductionBlock);
      for (std::size_t i = b * kReductionBlock; i < end; ++i) {
        const double cub = weights.empty() ? 1.0 : weights[i];
        const double wi = cub * std::exp(loglik[i] - log_scale);
        sample(i, yw);
        eval_sampler_->evaluate(ParameterVector(yw), mw, {});
        z += wi;
        for (std::size_t p = 0; p < points; ++p) {
          zp[2 * p] += wi * mw[p][0];
          zp[2 * p + 1] += wi * mw[p][1];
        }
      }
      block_z[b] = z;
    });
  }
  ShiftEstimate est;
  est.log_scale = log_scale;
  est.nodes = count;
  est.z_scaled = pairwise_sum(block_z);
  est.zprime_scaled.resize(2 * points);
  std::vector<double> column(blocks);
  for (std::size_t c = 0; c < 2 * points; ++c) {
    for (std::size_t b = 0; b < blocks; ++b) column[b] = block_zp[b][c];
    est.zprime_scaled[c] = pairwise_sum(column);
  }
  if (weights.empty()) {
    // Equal weights: divide the plain sums once, so a flat likelihood gives Z = 1 exactly.
    const double n = static_cast<double>(count);
    est.z_scaled /= n;
    for (auto& v : est.zprime_scaled) v /= n;
  }
  if (!(est.z_scaled > 0.0)) throw Error("estimate: normalizing constant is not positive");
  return est;
}

ShiftEstimate ratio_estimator(const PosteriorProblem& problem, const LatticeRule& rule, int shift_index,
                              int threads) {
  if (rule.dimension() != problem.dimension())
    throw InvalidArgument("ratio_estimator: lattice dimension " + std::to_string(rule.dimension()) +
                          " differs from the field dimension " + std::to_string(problem.dimension()));
  if (shift_index < 0 || shift_index >= rule.shift_count()) throw InvalidArgument("shift index out of range");
  const SampleFn sample = [&](std::size_t l, std::span<double> y) {
    rule.point(static_cast<std::int64_t>(l), shift_index, y);
  };
  return problem.estimate(static_cast<std::size_t>(rule.n()), sample, {}, threads);
}

std::vector<ShiftEstimate> mc_estimator(const PosteriorProblem& problem, std::size_t n_total, std::uint64_t seed,
                                        int batches, int threads) {
  if (batches < 1) throw InvalidArgument("mc_estimator: need at least one batch");
  if (n_total == 0 || n_total % static_cast<std::size_t>(batches) != 0)
    throw InvalidArgument("mc_estimator: n_total must be a positive multiple of the batch count");
  const std::size_t per_batch = n_total / static_cast<std::size_t>(batches);
  std::vector<ShiftEstimate> out;
  for (int b = 0; b < batches; ++b) {
    const std::size_t offset = static_cast<std::size_t>(b) * per_batch;
    const SampleFn sample = [&](std::size_t i, std::span<double> y) {
      auto gen = make_stream(seed, offset + i);
      for (auto& v : y) v = uniform01(gen) - 0.5;
    };
    out.push_back(problem.estimate(per_batch, sample, {}, threads));
  }
  return out;
}

PosteriorEstimate posterior_mean(std::span<const ShiftEstimate> estimates) {
  if (estimates.empty()) throw InvalidArgument("posterior_mean: no shifts");
  PosteriorEstimate post;
  const std::size_t size = estimates.front().zprime_scaled.size();
  for (const auto& e : estimates) {
    if (!(e.z_scaled > 0.0)) throw Error("posterior_mean: nonpositive Z (numerical underflow)");
    if (e.zprime_scaled.size() != size) throw InvalidArgument("posterior_mean: shifts disagree in size");
    post.log_z.push_back(e.log_scale + std::log(e.z_scaled));
    post.ratios.push_back(e.ratio());
  }
  const double inv_r = 1.0 / static_cast<double>(estimates.size());
  post.mean_field.assign(size, 0.0);
  for (const auto& q : post.ratios)
    for (std::size_t i = 0; i < size; ++i) post.mean_field[i] += q[i];
  for (auto& v : post.mean_field) v *= inv_r;
  return post;
}

double rms_error(const Mesh& mesh, std::span<const std::vector<double>> ratios, const std::vector<double>* reference) {
  const std::size_t size = 2 * mesh.node_count();
  for (const auto& q : ratios)
    if (q.size() != size) throw InvalidArgument("rms_error: ratio fields must hold two values per mesh node");
  const auto r = static_cast<double>(ratios.size());
  std::vector<double> diff(size);
  double sum = 0.0;
  if (reference != nullptr) {
    if (ratios.empty()) throw InvalidArgument("rms_error: no shifts");
    if (reference->size() != size) throw InvalidArgument("rms_error: reference field has the wrong size");
    for (const auto& q : ratios) {
      for (std::size_t i = 0; i < size; ++i) diff[i] = q[i] - (*reference)[i];
      const double norm = nodal_l2_norm(mesh, diff, 2);
      sum += norm * norm;
    }
    return std::sqrt(sum / r);
  }
  if (ratios.size() < 2) throw InvalidArgument("rms_error: proxy mode needs at least two shifts");
  // Running mean: equal fields give an exactly equal mean.
  std::vector<double> mean = ratios.front();
  for (std::size_t k = 1; k < ratios.size(); ++k)
    for (std::size_t i = 0; i < size; ++i) mean[i] += (ratios[k][i] - mean[i]) / static_cast<double>(k + 1);
  for (const auto& q : ratios) {
    for (std::size_t i = 0; i < size; ++i) diff[i] = q[i] - mean[i];
    const double norm = nodal_l2_norm(mesh, diff, 2);
    sum += norm * norm;
  }
  return std::sqrt(sum / (r * (r - 1.0)));
}

}  // namespace shapeqmc

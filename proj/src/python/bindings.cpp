#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shapeqmc/experiment.hpp"

namespace py = pybind11;
using namespace shapeqmc;

namespace {

Eigen::MatrixXd nodes_array(const Mesh& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.node_count()), 2);
  for (std::size_t i = 0; i < m.node_count(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.nodes[i].transpose();
  return out;
}

Eigen::MatrixXi triangles_array(const Mesh& m) {
  Eigen::MatrixXi out(static_cast<Eigen::Index>(m.triangle_count()), 3);
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
    for (int k = 0; k < 3; ++k) out(static_cast<Eigen::Index>(t), k) = m.triangles[t][static_cast<std::size_t>(k)];
  return out;
}

}  // namespace

PYBIND11_MODULE(_shapeqmc, m) {
  m.doc() = "Bayesian shape inversion with tailored lattice rules";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<GevreyProfile>(m, "GevreyProfile")
      .def(py::init<>())
      .def_readwrite("beta", &GevreyProfile::beta)
      .def_readwrite("b_scale", &GevreyProfile::b_scale)
      .def_readwrite("b_decay", &GevreyProfile::b_decay)
      .def_readwrite("p", &GevreyProfile::p)
      .def("b", &GevreyProfile::b);

  py::class_<PerturbationField>(m, "PerturbationField")
      .def_static("paper_radial", [](int modes) { return PerturbationField::paper_radial(modes); })
      .def_static("identity", [](int s) { return PerturbationField::identity(s); })
      .def_property_readonly("dimension", &PerturbationField::dimension)
      .def_property_readonly("modes", &PerturbationField::modes)
      .def("truncate", &PerturbationField::truncate)
      .def("evaluate_map",
           [](const PerturbationField& f, const Point2& x, std::vector<double> y) {
             return f.evaluate_map(x, ParameterVector(std::move(y)));
           })
      .def("jacobian", [](const PerturbationField& f, const Point2& x, std::vector<double> y) {
        return f.jacobian(x, ParameterVector(std::move(y)));
      });

  m.def("diffusion_matrix", py::overload_cast<const Matrix2&>(&diffusion_matrix));

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("nodes", &nodes_array)
      .def_property_readonly("triangles", &triangles_array)
      .def_readonly("h", &Mesh::h)
      .def_readonly("level", &Mesh::level)
      .def_property_readonly("boundary_nodes", &Mesh::boundary_nodes)
      .def("total_area", &Mesh::total_area);
  m.def("build_disk_mesh", &build_disk_mesh);

  m.def("observation",
        [](const PerturbationField& field, std::vector<double> y, int level, std::vector<Point2> points) {
          return observation(field, ParameterVector(std::move(y)), level, paper_source(), points);
        },
        py::arg("field"), py::arg("y"), py::arg("level"), py::arg("points"));

  py::class_<PodWeights>(m, "PodWeights")
      .def_property_readonly("lambda_", &PodWeights::lambda)
      .def_property_readonly("max_dimension", &PodWeights::max_dimension)
      .def("order_factor", &PodWeights::order_factor)
      .def("coordinate_factor", &PodWeights::coordinate_factor)
      .def("gamma", [](const PodWeights& w, std::vector<int> u) { return w.gamma(u); });

  m.def("riemann_zeta", &riemann_zeta);
  m.def("choose_lambda", &choose_lambda, py::arg("p"), py::arg("beta"), py::arg("alpha"));
  m.def("pod_weights",
        [](const GevreyProfile& profile, double lambda, int s_max) {
          return pod_weights(profile, lambda, s_max, false, ConstantsLedger{});
        },
        py::arg("profile"), py::arg("lambda_"), py::arg("s_max"));
  m.def("cbc_construct", &cbc_construct, py::arg("n"), py::arg("s"), py::arg("weights"));
  m.def("shift_averaged_wce",
        [](const std::vector<std::int64_t>& z, std::int64_t n, const PodWeights& w) {
          return shift_averaged_wce(z, n, w);
        });
  m.def("error_bound", &error_bound, py::arg("weights"), py::arg("n"), py::arg("lambda_"));
  m.def("next_prime", &next_prime);
  m.def("lattice_points", [](std::int64_t n, std::vector<std::int64_t> z, std::vector<double> shift) {
    const LatticeRule rule(n, std::move(z), std::vector<std::vector<double>>{std::move(shift)});
    return rule.generate_points(0);
  });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("parse", &ExperimentConfig::parse)
      .def("to_text", &ExperimentConfig::to_text)
      .def("validate", &ExperimentConfig::validate)
      .def_readwrite("s", &ExperimentConfig::s)
      .def_readwrite("mesh_level", &ExperimentConfig::mesh_level)
      .def_readwrite("R", &ExperimentConfig::R)
      .def_readwrite("n_list", &ExperimentConfig::n_list)
      .def_readwrite("methods", &ExperimentConfig::methods)
      .def_readwrite("fem_levels", &ExperimentConfig::fem_levels)
      .def_readwrite("fem_ref_level", &ExperimentConfig::fem_ref_level);

  m.def("fem_rates", [](const ExperimentConfig& c) {
    const auto r = run_fem_study(c);
    return py::make_tuple(r.analytic_rates, r.reference_rates);
  });
  m.def("convergence_fits", [](const ExperimentConfig& c, int threads) {
    std::vector<std::tuple<std::string, double, double>> out;
    for (const auto& [method, fit] : run_convergence(c, threads).fits) out.emplace_back(method, fit.slope, fit.residual);
    return out;
  });
}

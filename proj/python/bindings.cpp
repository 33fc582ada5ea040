#include "levy_contract/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace levy_contract;

namespace {

py::dict bound_row_dict(const BoundRow& r) {
  py::dict d;
  d["kind"] = to_string(r.kind);
  d["k"] = r.k;
  d["s"] = r.s;
  d["t"] = r.t;
  d["beta"] = r.beta;
  d["kappa"] = r.kappa;
  d["rhs_total"] = r.rhs_total;
  d["strategy"] = r.strategy;
  d["std_err"] = r.std_err;
  return d;
}

py::dict cell_dict(const ConditionalMseEstimate& c) {
  py::dict d;
  d["k"] = c.k;
  d["t"] = c.t;
  d["n"] = c.n_paths;
  d["mse"] = c.mse;
  d["std_err"] = c.std_err;
  d["ci_low"] = c.ci_low;
  d["ci_high"] = c.ci_high;
  d["bound_rhs"] = c.bound_rhs;
  d["margin"] = c.margin;
  d["insufficient"] = c.insufficient;
  return d;
}

py::dict result_dict(const ExperimentResult& r) {
  py::list bounds, cells;
  for (const auto& row : r.bounds) bounds.append(bound_row_dict(row));
  for (const auto& c : r.audit.cells) cells.append(cell_dict(c));
  py::dict d;
  d["exit_code"] = r.exit_code;
  d["certified"] = r.certified;
  d["certification"] = r.certification;
  d["bounds"] = bounds;
  d["audit"] = cells;
  d["hard_violations"] = r.audit.hard_violations;
  d["warnings"] = r.audit.warnings;
  d["report"] = r.report;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stochastic-contraction bounds and Monte Carlo audits";
  m.attr("__version__") = artifact_version();

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      std::string text = e.what();
      for (const auto& problem : e.problems()) text += "\n  " + problem;
      PyErr_SetString(config_error.ptr(), text.c_str());
    } catch (const InvalidInput& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ContractionMarginError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::enum_<TimeLaw>(m, "TimeLaw")
      .value("gamma_unconditional", TimeLaw::gamma_unconditional)
      .value("uniform_order_statistics", TimeLaw::uniform_order_statistics);

  py::enum_<PsiMethod>(m, "PsiMethod")
      .value("quadrature", PsiMethod::quadrature)
      .value("monte_carlo", PsiMethod::monte_carlo)
      .value("loose_first_term", PsiMethod::loose_first_term)
      .value("loose_max_nng", PsiMethod::loose_max_nng)
      .value("loose_sum_exp", PsiMethod::loose_sum_exp);

  py::class_<PsiSpec>(m, "PsiSpec")
      .def(py::init<>())
      .def_readwrite("alpha2", &PsiSpec::alpha2)
      .def_readwrite("eta", &PsiSpec::eta)
      .def_readwrite("kappa", &PsiSpec::kappa)
      .def_readwrite("beta", &PsiSpec::beta)
      .def_readwrite("lambda_", &PsiSpec::lambda)
      .def_readwrite("d0", &PsiSpec::d0)
      .def_readwrite("k", &PsiSpec::k)
      .def_readwrite("time_law", &PsiSpec::time_law)
      .def_property(
          "window", [](const PsiSpec& s) { return std::make_pair(s.window.start, s.window.end); },
          [](PsiSpec& s, std::pair<double, double> w) { s.window = {w.first, w.second}; });

  py::class_<PsiStrategy>(m, "PsiStrategy")
      .def(py::init<>())
      .def(py::init([](PsiMethod method, std::size_t samples, std::uint64_t seed) {
             return PsiStrategy{method, samples, seed, 0};
           }),
           py::arg("method"), py::arg("samples") = 100000, py::arg("seed") = 0)
      .def_readwrite("method", &PsiStrategy::method)
      .def_readwrite("samples", &PsiStrategy::samples)
      .def_readwrite("seed", &PsiStrategy::seed)
      .def_readwrite("stream_id", &PsiStrategy::stream_id);

  py::class_<PsiValue>(m, "PsiValue")
      .def_readonly("value", &PsiValue::value)
      .def_readonly("std_err", &PsiValue::std_err)
      .def_readonly("is_upper_bound", &PsiValue::is_upper_bound);

  m.def("psi_k", &psi_k, py::arg("spec"), py::arg("strategy") = PsiStrategy{});
  m.def("poisson_prob", &poisson_prob, py::arg("lam"), py::arg("s"), py::arg("t"), py::arg("k"));
  m.def("poisson_truncation", &poisson_truncation, py::arg("lam"), py::arg("duration"));

  m.def(
      "white_bound_constant_metric",
      [](const Matrix& metric, double alpha, double gamma, double initial_msq, double s, double t) {
        const BoundParams b = white_bound(constant_metric_certificate(metric, alpha), gamma);
        return bound_row_dict(bound_row(b, initial_msq, s, t));
      },
      py::arg("metric"), py::arg("alpha"), py::arg("gamma"), py::arg("initial_msq"), py::arg("s"), py::arg("t"));
  m.def(
      "shot_kappa_constant", [](double c, int k, double beta, double s, double t) {
        return shot_kappa(constant_h(c), k, beta, s, t);
      },
      py::arg("c"), py::arg("k"), py::arg("beta"), py::arg("s"), py::arg("t"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("experiment", &ExperimentConfig::experiment)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("out", &ExperimentConfig::out)
      .def_readwrite("n_paths", &ExperimentConfig::n_paths)
      .def_readwrite("k_values", &ExperimentConfig::k_values)
      .def_readwrite("dt", &ExperimentConfig::dt)
      .def_readwrite("s", &ExperimentConfig::s)
      .def_readwrite("t_end", &ExperimentConfig::t_end)
      .def_readwrite("grid_points", &ExperimentConfig::grid_points)
      .def_readwrite("strategy", &ExperimentConfig::strategy)
      .def_readwrite("alpha_scale", &ExperimentConfig::alpha_scale)
      .def_readwrite("eta_scale", &ExperimentConfig::eta_scale)
      .def("set", &set_config_value, py::arg("key"), py::arg("value"))
      .def("validate", &ExperimentConfig::validate)
      .def("to_ini", &ExperimentConfig::to_ini);

  m.def(
      "parse_config", [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      },
      py::arg("text"));
  m.def("experiment_names", &experiment_names);
  m.def(
      "evaluate_experiment",
      [](const ExperimentConfig& cfg) {
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = evaluate_experiment(cfg);
        }
        return result_dict(r);
      },
      py::arg("config"));
  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg) {
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return result_dict(r);
      },
      py::arg("config"));
  m.def("sweep", &sweep, py::arg("config"), py::arg("parameter"), py::arg("values"),
        py::call_guard<py::gil_scoped_release>());
}

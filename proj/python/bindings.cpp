#include "apgauge/commands.hpp"
#include "apgauge/config.hpp"
#include "apgauge/errors.hpp"
#include "apgauge/oracle.hpp"
#include "apgauge/spectra.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace apgauge;

namespace {

py::dict ids_dict(const IdsResult& r) {
  py::dict zones;
  for (const auto& z : r.zones) zones[py::str(z.zone)] = z.value;
  py::dict d;
  d["value"] = r.value;
  d["zones"] = zones;
  d["steps"] = r.steps;
  d["converged"] = r.converged;
  d["remainder_bound"] = r.remainder_bound;
  d["support_exact"] = r.support_exact;
  d["notes"] = r.notes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_apgauge, m) {
  m.doc() = "Gauge-transform pipeline for A0(hD) + eps B(x, hD) with almost-periodic B";

  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
  py::register_exception<SmallDivisorError>(m, "SmallDivisorError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
  py::register_exception<QuadratureError>(m, "QuadratureError", base.ptr());
  py::register_exception<DecompositionError>(m, "DecompositionError", base.ptr());
  py::register_exception<InconsistencyError>(m, "InconsistencyError", base.ptr());
  py::register_exception<UncertaintyError>(m, "UncertaintyError", base.ptr());

  py::class_<RunConfig>(m, "Config")
      .def_readonly("dimension", &RunConfig::dimension)
      .def_readonly("eps", &RunConfig::eps)
      .def_readonly("h", &RunConfig::h)
      .def_readonly("tau", &RunConfig::tau)
      .def_readonly("K", &RunConfig::K)
      .def_readonly("out", &RunConfig::out)
      .def("to_json", &serialize_config)
      .def(
          "ids",
          [](const RunConfig& c, double eps, double h, double tau, int K) {
            IdsResult r;
            {
              py::gil_scoped_release nogil;
              const Operator op = c.build_operator();
              r = ids_pipeline(op, eps, h, tau, c.zone_params(op, eps, h, K), c.pipeline_controls(K));
            }
            return ids_dict(r);
          },
          py::arg("eps"), py::arg("h"), py::arg("tau"), py::arg("K") = 2)
      .def(
          "oracle_ids",
          [](const RunConfig& c, double eps, double h, double tau) {
            const Operator op = c.build_operator();
            return ids_oracle(op, tau, h, eps, c.oracle.k_points, c.oracle.radius);
          },
          py::arg("eps"), py::arg("h"), py::arg("tau"), py::call_guard<py::gil_scoped_release>())
      .def(
          "spectral_function",
          [](const RunConfig& c, const std::vector<double>& xs, double eps, double h, double tau, int K) {
            const Operator op = c.build_operator();
            return spectral_function_leading(xs, tau, op, eps, h, c.zone_params(op, eps, h, K),
                                             c.pipeline_controls(K));
          },
          py::arg("x"), py::arg("eps"), py::arg("h"), py::arg("tau"), py::arg("K") = 1,
          py::call_guard<py::gil_scoped_release>())
      .def("__repr__", [](const RunConfig& c) {
        return "<apgauge.Config dimension=" + std::to_string(c.dimension) + " out='" + c.out + "'>";
      });

  m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = std::vector<std::string>{});
  m.def("load_config", &load_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def("command_names", &command_names);
  m.def(
      "run_command",
      [](const std::string& name, const RunConfig& cfg, const std::string& out_dir) {
        const CommandResult r = run_command(name, cfg, out_dir);
        return py::make_tuple(r.files, r.summary);
      },
      py::arg("name"), py::arg("config"), py::arg("out_dir"));
  m.def("loglog_slope", &loglog_slope, py::arg("x"), py::arg("y"));
}

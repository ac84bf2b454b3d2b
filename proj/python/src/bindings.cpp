#include <optional>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "neoqed/analysis.hpp"
#include "neoqed/config.hpp"
#include "neoqed/runner.hpp"

namespace py = pybind11;
using namespace neoqed;

namespace {

py::array_t<double> grid_array(const SweepResult& s, const std::string& field) {
  py::array_t<double> out({s.size1(), s.size2()});
  const auto& v = s.field(field);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict sweep_dict(const SweepResult& s) {
  py::dict fields;
  for (const auto& name : s.field_names) fields[py::str(name)] = grid_array(s, name);
  py::dict d;
  d["axis1"] = py::dict(py::arg("name") = s.axis1.name, py::arg("unit") = s.axis1.unit,
                        py::arg("values") = py::array_t<double>(s.axis1.values.size(), s.axis1.values.data()));
  d["axis2"] = py::dict(py::arg("name") = s.axis2.name, py::arg("unit") = s.axis2.unit,
                        py::arg("values") = py::array_t<double>(s.axis2.values.size(), s.axis2.values.data()));
  d["fields"] = fields;
  d["cell_errors"] = s.cell_errors;
  return d;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["time_us"] = py::array_t<double>(t.times.size(), t.times.data());
  for (std::size_t k = 0; k < t.names.size(); ++k) {
    d[py::str(t.names[k])] = py::array_t<double>(t.series[k].size(), t.series[k].data());
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_neoqed, m) {
  m.doc() = "Lindblad simulation of resonator-coupled electron qubits";
  m.attr("__version__") = std::string(code_version());

  // Module-lifetime exception types; references are held by the module.
  static PyObject* error = py::exception<Error>(m, "NeoqedError", PyExc_RuntimeError).ptr();
  static PyObject* config_error = py::exception<ConfigError>(m, "ConfigError", error).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error, e.what());
    } catch (const Error& e) {
      PyErr_SetString(error, e.what());
    }
  });

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("from_yaml", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def_static("preset", &load_preset, py::arg("name"))
      .def_static("resolve", &resolve_config, py::arg("ref"), "A path or preset:<name>")
      .def("to_yaml", &serialize_config)
      .def_property_readonly("name", [](const ExperimentConfig& c) { return c.name; })
      .def_property_readonly("protocol", [](const ExperimentConfig& c) { return std::string(protocol_name(c.protocol)); })
      .def_property_readonly("cells", &ExperimentConfig::cell_count)
      .def_property_readonly("spec_hash", [](const ExperimentConfig& c) { return spec_hash(c); })
      .def("with_overrides",
           [](const ExperimentConfig& c, std::optional<std::string> frame, std::optional<double> fixed_step_us) {
             RunOverrides ov;
             if (frame) ov.frame = *frame == "lab" ? FrameKind::Lab : FrameKind::Rotating;
             ov.fixed_step_us = fixed_step_us;
             return apply_overrides(c, ov);
           },
           py::arg("frame") = py::none(), py::arg("fixed_step_us") = py::none())
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; });

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly("sweep",
                             [](const RunResult& r) -> py::object {
                               return r.sweep ? py::object(sweep_dict(*r.sweep)) : py::object(py::none());
                             })
      .def_property_readonly("trajectories",
                             [](const RunResult& r) {
                               py::dict d;
                               for (const auto& [stem, t] : r.trajectories) d[py::str(stem)] = trajectory_dict(t);
                               return d;
                             })
      .def_property_readonly("analysis_json", [](const RunResult& r) { return r.analysis.dump(); })
      .def_property_readonly("resolved_json", [](const RunResult& r) { return r.resolved.dump(); })
      .def_property_readonly("warnings", [](const RunResult& r) { return r.warnings; })
      .def_property_readonly("wall_time_s", [](const RunResult& r) { return r.wall_time_s; })
      .def("write", &write_outputs, py::arg("out_dir"), "Write CSV, sidecar and manifest files");

  m.def("run", &run_experiment, py::arg("config"), py::arg("threads") = py::none(),
        py::call_guard<py::gil_scoped_release>());
  m.def("plan_json", [](const ExperimentConfig& c) { return plan_experiment(c).dump(); }, py::arg("config"));
  m.def("preset_names", &preset_names);
  m.def("zz_shift_mhz", [](const ExperimentConfig& c) { return zz_shift_mhz(c.system_spec()); }, py::arg("config"));

  auto o = m.def_submodule("oracles", "Closed-form estimates; all frequencies in MHz");
  o.def("dispersive_shift", &oracle_dispersive_shift, py::arg("g"), py::arg("delta"));
  o.def("cr_frequency", &oracle_cr_frequency, py::arg("amplitude"), py::arg("j"), py::arg("delta_bd"));
  o.def("bswap_frequency", &oracle_bswap_frequency, py::arg("amplitude"), py::arg("j"), py::arg("delta_bd"));
  o.def("swap_threshold", &oracle_swap_threshold, py::arg("delta_bd"), py::arg("chi"));
}

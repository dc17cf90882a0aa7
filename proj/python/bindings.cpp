#include "hsflow/algebra.hpp"
#include "hsflow/checkpoint.hpp"
#include "hsflow/donaldson.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/runner.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace hsflow;

namespace {

// JSON crosses the boundary as text; the package wrapper decodes it.
std::string run_text(const std::string& config, const std::string& output_dir) {
  RunConfig cfg;
  try {
    cfg = parse_config_text(config);
  } catch (const ConfigError& e) {
    nlohmann::ordered_json j;
    j["exit_code"] = static_cast<int>(kExitConfig);
    j["status"] = "config-error";
    j["message"] = e.what();
    return j.dump();
  }
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  apply_environment(cfg);
  RunReport rep;
  {
    py::gil_scoped_release release;
    rep = run(cfg);
  }
  nlohmann::ordered_json j;
  j["exit_code"] = rep.exit_code;
  j["status"] = rep.status;
  j["message"] = rep.message;
  j["steps"] = rep.steps;
  j["t_end"] = rep.t_end;
  j["output_dir"] = rep.output_dir.string();
  j["violations"] = rep.violations;
  j["summary"] = rep.summary;
  return j.dump();
}

py::tuple load_checkpoint(const std::string& path) {
  Checkpoint ck = [&] {
    try {
      return read_checkpoint(path);
    } catch (const FormatError& e) {
      throw py::value_error(e.what());
    }
  }();
  py::dict arrays;
  for (const auto& a : ck.arrays) {
    const Lattice& lat = a.field.lattice();
    std::vector<py::ssize_t> shape{a.field.components(), lat.n[0], lat.n[1], lat.n[2], lat.n[3]};
    py::array_t<double> arr(shape);
    std::memcpy(arr.mutable_data(), a.field.data().data(), a.field.data().size() * sizeof(double));
    arrays[py::str(a.name)] = arr;
  }
  return py::make_tuple(checkpoint_header(ck), arrays);
}

Triple2FormPoint triple_from(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2 || a.shape(0) != 3 || a.shape(1) != 6)
    throw py::value_error("expected a (3, 6) array of 2-form coefficients");
  Triple2FormPoint t;
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 6; ++s) t.omega[i].c[s] = a.at(i, s);
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hypersymplectic flow on T^4";

  m.def("canonical_config", [](const std::string& text) {
    try {
      return config_text(parse_config_text(text));
    } catch (const ConfigError& e) {
      throw py::value_error(e.what());
    }
  });
  m.def("run_json", &run_text, py::arg("config"), py::arg("output_dir") = "");
  m.def("read_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("donaldson_json", [](double w0, const std::vector<int>& cells, double keep) {
    DonaldsonStudy s;
    {
      py::gil_scoped_release release;
      s = donaldson_study(w0, cells, keep);
    }
    return to_json(s).dump();
  }, py::arg("w0") = 1.0, py::arg("cells") = std::vector<int>{8, 16}, py::arg("keep") = 0.5);

  m.def("metric_from_triple", [](py::array_t<double, py::array::c_style | py::array::forcecast> a) {
    const Triple2FormPoint t = triple_from(a);
    if (!is_hypersymplectic(t).ok) throw py::value_error("triple is not hypersymplectic");
    const Mat4 g = metric_from_triple(t).mat;
    py::array_t<double> out({4, 4});
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out.mutable_at(i, j) = g(i, j);
    return out;
  });
  m.def("q_matrix", [](py::array_t<double, py::array::c_style | py::array::forcecast> a) {
    const Mat3 q = normalize_volume(triple_from(a)).q.mat;
    py::array_t<double> out({3, 3});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.mutable_at(i, j) = q(i, j);
    return out;
  });
  m.def("calabi_ode_residual", &calabi_ode_residual, py::arg("a"), py::arg("x"));
  m.def("calabi_pole", &calabi_pole_numeric, py::arg("a"));

  m.attr("EXIT_OK") = static_cast<int>(kExitOk);
  m.attr("EXIT_VIOLATION") = static_cast<int>(kExitViolation);
  m.attr("EXIT_STABILITY") = static_cast<int>(kExitStability);
  m.attr("EXIT_CONFIG") = static_cast<int>(kExitConfig);
}

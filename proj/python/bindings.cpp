#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mobilectl/config.hpp"
#include "mobilectl/harness.hpp"
#include "mobilectl/solver.hpp"

namespace py = pybind11;
using namespace mobilectl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw Error(ErrorKind::InvalidArgument, "expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

struct PyRun {
    RunArtifact art;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "mobilectl core";

    py::exception<Error>(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object type = py::module_::import("mobilectl._core").attr("Error");
            py::object err = type(std::string(to_string(e.kind())) + ": " + e.what());
            err.attr("kind") = to_string(e.kind());
            PyErr_SetObject(type.ptr(), err.ptr());
        }
    });

    py::class_<ExperimentConfig>(m, "Config")
        .def_property_readonly("experiment", [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); })
        .def_readonly("n", &ExperimentConfig::n)
        .def_readonly("t0", &ExperimentConfig::t0)
        .def_readonly("T", &ExperimentConfig::T)
        .def_readonly("dt", &ExperimentConfig::dt)
        .def_readonly("eps", &ExperimentConfig::eps)
        .def_readonly("l", &ExperimentConfig::l)
        .def_readonly("seed", &ExperimentConfig::seed)
        .def_readonly("overrides", &ExperimentConfig::overrides)
        .def_readonly("source_text", &ExperimentConfig::source_text)
        .def("__repr__", [](const ExperimentConfig& c) {
            return "<Config " + std::string(to_string(c.kind)) + " n=" + std::to_string(c.n) + ">";
        });

    m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
          py::arg("origin") = "config");
    m.def("load_config",
          [](const std::filesystem::path& p, const std::vector<std::string>& o) { return load_config(p, o); },
          py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    py::class_<PyRun>(m, "RunResult")
        .def_property_readonly("dir", [](const PyRun& r) { return r.art.dir; })
        .def_property_readonly("exit_code", [](const PyRun& r) { return r.art.exit_code(); })
        .def_property_readonly("passed", [](const PyRun& r) { return r.art.all_passed(); })
        .def_property_readonly("failed", [](const PyRun& r) { return r.art.failed; })
        .def_property_readonly("error", [](const PyRun& r) { return r.art.error; })
        .def_property_readonly("terminal_error",
                               [](const PyRun& r) -> py::object {
                                   if (r.art.terminal_error < 0) return py::none();
                                   return py::float_(r.art.terminal_error);
                               })
        .def_property_readonly("summary", [](const PyRun& r) { return json_to_py(r.art.summary()); })
        .def_property_readonly("times",
                               [](const PyRun& r) {
                                   std::vector<double> t;
                                   for (const auto& s : r.art.traj.states) t.push_back(s.time);
                                   return to_array(t);
                               })
        .def_property_readonly("final_state",
                               [](const PyRun& r) -> py::object {
                                   if (r.art.traj.empty()) return py::none();
                                   return to_array(r.art.traj.final().values);
                               })
        .def("certificates", [](const PyRun& r) {
            py::dict d;
            for (const auto& rep : r.art.reports) d[py::str(rep.name)] = to_string(rep.verdict);
            return d;
        });

    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg, const std::filesystem::path& out) {
            PyRun r;
            {
                py::gil_scoped_release nogil;
                r.art = run_experiment(cfg, out);
            }
            return r;
        },
        py::arg("config"), py::arg("out_dir"));

    m.def("grid_nodes", [](int n) {
        const auto g = build_grid(n);
        return to_array({g.nodes().begin(), g.nodes().end()});
    }, py::arg("n"));

    m.def(
        "solve_heat",
        [](const Array& y0, double b, double t_end, double dt) {
            const auto values = to_vector(y0);
            const auto grid = build_grid(static_cast<int>(values.size()));
            SolverConfig cfg;
            cfg.dt = dt;
            Trajectory traj;
            {
                py::gil_scoped_release nogil;
                traj = solve_forward(State{values, 0.0}, t_end, DiffusionLaw{constant_law(b)}, {}, grid, cfg);
            }
            std::vector<double> t;
            Array y({static_cast<py::ssize_t>(traj.size()), static_cast<py::ssize_t>(values.size())});
            auto w = y.mutable_unchecked<2>();
            for (std::size_t k = 0; k < traj.size(); ++k) {
                t.push_back(traj.states[k].time);
                for (std::size_t i = 0; i < values.size(); ++i)
                    w(static_cast<py::ssize_t>(k), static_cast<py::ssize_t>(i)) = traj.states[k].values[i];
            }
            return py::make_tuple(to_array(t), y);
        },
        py::arg("y0"), py::arg("b"), py::arg("t_end"), py::arg("dt") = 0.0,
        "Uncontrolled constant-coefficient solve from t=0; returns (times, states).");

    m.def(
        "eigen_oracle",
        [](const Array& y0, double b, double m_damp, double t) {
            const auto values = to_vector(y0);
            const auto grid = build_grid(static_cast<int>(values.size()));
            return to_array(eigen_oracle(State{values, 0.0}, grid, b, m_damp, t).values);
        },
        py::arg("y0"), py::arg("b"), py::arg("m") = 0.0, py::arg("t"));

    m.def("sweep_windows", [](double l) {
        std::vector<std::pair<double, double>> out;
        for (const auto& w : sweep_window_sequence(l)) out.emplace_back(w.lo(), w.hi());
        return out;
    }, py::arg("l"));
}

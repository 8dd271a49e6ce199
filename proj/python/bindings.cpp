#include "gbsp/config.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace gbsp;

namespace {

ApproxFunction make_psi(const std::string& kind, double tau, const std::vector<double>& weights, double exponent) {
    if (kind == "power") return ApproxFunction::power(tau);
    if (kind == "quasi-norm-power") return ApproxFunction::quasi_norm_power(tau, weights);
    if (kind == "log-corrected") return ApproxFunction::log_corrected(tau, exponent);
    throw ArgumentError("psi kind must be power, quasi-norm-power or log-corrected");
}

DimensionFunction make_f(const std::string& kind, double s, double exponent) {
    if (kind == "power") return DimensionFunction::power(s);
    if (kind == "power-log") return DimensionFunction::power_log(s, exponent);
    throw ArgumentError("f kind must be power or power-log");
}

}  // namespace

PYBIND11_MODULE(_gbsp, m) {
    m.doc() = "Resonant-slab covers, convergence series and Hessian diagnostics";

    // Translators run newest first, so the subclass is registered last.
    auto arg_error = py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", arg_error.ptr());

    py::class_<ApproxFunction>(m, "ApproxFunction")
        .def(py::init(&make_psi), py::arg("kind") = "power", py::arg("tau") = 3.0,
             py::arg("weights") = std::vector<double>{}, py::arg("exponent") = 1.0)
        .def("__call__", [](const ApproxFunction& p, const IntVec& q) { return p(q); });

    py::class_<DimensionFunction>(m, "DimensionFunction")
        .def(py::init(&make_f), py::arg("kind") = "power", py::arg("s") = 2.5, py::arg("exponent") = 1.0)
        .def("__call__", [](const DimensionFunction& f, double r) { return f(r); })
        .def("F", &DimensionFunction::F, py::arg("n"), py::arg("x"));

    m.def("gbsp_term", [](const IntVec& q, const ApproxFunction& psi, const DimensionFunction& f, int n) {
        return gbsp_term(q, psi, f, n);
    }, py::arg("q"), py::arg("psi"), py::arg("f"), py::arg("n"));
    m.def("sbv_term", [](const IntVec& q, const ApproxFunction& psi, const DimensionFunction& f, int n) {
        return sbv_term(q, psi, f, n);
    }, py::arg("q"), py::arg("psi"), py::arg("f"), py::arg("n"));
    m.def("shell_size", &shell_size, py::arg("Q"), py::arg("n"));
    m.def("dim_bound", &dim_bound, py::arg("n"), py::arg("tau"));
    m.def("lower_order", &lower_order, py::arg("psi"), py::arg("n"), py::arg("t_schedule"));

    m.def(
        "series_scan",
        [](const ApproxFunction& psi, const DimensionFunction& f, int n, long long q_max, const std::string& mode,
           int threads) {
            SeriesOptions opts;
            opts.threads = threads;
            const SeriesReport r = series_scan(psi, f, n, q_max, parse_series_mode(mode), opts);
            py::dict out;
            out["verdict"] = to_string(r.verdict);
            out["slope"] = r.slope;
            out["total"] = r.total();
            out["csv"] = r.to_csv();
            return out;
        },
        py::arg("psi"), py::arg("f"), py::arg("n"), py::arg("q_max"), py::arg("mode") = "gbsp", py::arg("threads") = 1);

    m.def("builtin_names", &builtin_names);
    m.def(
        "singular_fraction",
        [](const std::string& name, const std::vector<double>& params, int grid_res, double tol_rel) {
            return singular_fraction(make_builtin(name, params), grid_res, tol_rel).fraction;
        },
        py::arg("name"), py::arg("params") = std::vector<double>{}, py::arg("grid_res") = 32, py::arg("tol_rel") = 1e-9);

    m.def(
        "validate_config",
        [](const std::string& text, std::optional<std::string> command) {
            (void)validate_config(nlohmann::json::parse(text, nullptr, true, true), command);
        },
        py::arg("config_json"), py::arg("command") = py::none(),
        "Raise ConfigError when the JSON config document is invalid.");

    m.def(
        "run",
        [](const std::string& command, const std::string& text, std::optional<long long> qmax, std::optional<int> threads,
           std::optional<long long> p, std::optional<IntVec> q, std::optional<std::vector<double>> seed_point) {
            const RunConfig cfg = validate_config(nlohmann::json::parse(text, nullptr, true, true), command);
            RunOverrides ov;
            ov.qmax = qmax;
            ov.threads = threads;
            ov.p = p;
            ov.q = q;
            ov.seed_point = seed_point;
            RunResult res;
            {
                py::gil_scoped_release release;
                res = run_command(command, cfg, ov);
            }
            return py::make_tuple(res.exit_code, res.files, res.message);
        },
        py::arg("command"), py::arg("config_json"), py::arg("qmax") = py::none(), py::arg("threads") = py::none(),
        py::arg("p") = py::none(), py::arg("q") = py::none(), py::arg("seed_point") = py::none(),
        "Run one command; returns (exit_code, {file name: contents}, message).");
}

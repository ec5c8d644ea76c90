#include "pgee/cli.hpp"
#include "pgee/config.hpp"
#include "pgee/distributions.hpp"
#include "pgee/errors.hpp"
#include "pgee/inference.hpp"
#include "pgee/io.hpp"
#include "pgee/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace pgee;

namespace {

Dataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    return read_long_csv(in);
}

using Builder = Report (*)(const Dataset&, const RunConfig&, const std::string&);

py::tuple run_report(Builder build, const std::string& config_json, const std::string& data_csv) {
    const auto cfg = parse_run_config(config_json);
    const auto report = build(dataset_from_csv(data_csv), cfg, utc_timestamp());
    return py::make_tuple(report.json, report.status);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cross-fitted penalized estimating equations";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("fit", [](const std::string& c, const std::string& d) { return run_report(fit_report, c, d); },
          py::arg("config_json"), py::arg("data_csv"));
    m.def("screen",
          [](const std::string& c, const std::string& d) { return run_report(screen_report, c, d); },
          py::arg("config_json"), py::arg("data_csv"));
    m.def("crossfit",
          [](const std::string& c, const std::string& d) { return run_report(crossfit_report, c, d); },
          py::arg("config_json"), py::arg("data_csv"));
    m.def("test", [](const std::string& c, const std::string& d) { return run_report(test_report, c, d); },
          py::arg("config_json"), py::arg("data_csv"));

    m.def(
        "simulate",
        [](const std::string& scenario_json, int reps, int threads) {
            auto scenario = parse_scenario(scenario_json);
            if (reps > 0) scenario.scenario.reps = reps;
            if (threads > 0) scenario.scenario.threads = threads;
            const auto out = simulate_report(scenario, utc_timestamp());
            return py::make_tuple(out.metrics_csv, out.summary_json);
        },
        py::arg("scenario_json"), py::arg("reps") = 0, py::arg("threads") = 0);

    m.def(
        "generate",
        [](const std::string& scenario_json, int n, std::uint64_t seed) {
            const auto scenario = parse_scenario(scenario_json);
            const auto sim = generate(scenario.scenario, n, seed);
            std::ostringstream csv;
            write_long_csv(sim.data, csv);
            py::dict out;
            out["data_csv"] = csv.str();
            out["beta0"] = sim.beta0;
            out["m_set"] = sim.m_set;
            out["support"] = sim.support;
            return out;
        },
        py::arg("scenario_json"), py::arg("n"), py::arg("seed"));

    m.def(
        "wald",
        [](const VectorXd& beta_m, const MatrixXd& c, const VectorXd& t, const MatrixXd& omega_m,
           int n) {
            HypothesisSpec hyp;
            hyp.C = c;
            hyp.t = t;
            for (int j = 0; j < beta_m.size(); ++j) hyp.m_set.push_back(j);
            const auto w = wald(beta_m, hyp, omega_m, n);
            py::dict out;
            out["statistic"] = w.statistic;
            out["df"] = w.df;
            out["p_value"] = w.p_value;
            return out;
        },
        py::arg("beta_m"), py::arg("C"), py::arg("t"), py::arg("omega_m"), py::arg("n"));

    m.def("chi2_sf", &chi2_sf, py::arg("x"), py::arg("df"), py::arg("noncentrality") = 0.0);
    m.def("chi2_quantile", &chi2_quantile, py::arg("prob"), py::arg("df"));
}

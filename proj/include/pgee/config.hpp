#pragma once

#include "pgee/crossfit.hpp"
#include "pgee/simulation.hpp"
#include "pgee/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pgee {

/// Parsed run configuration. Unknown keys are rejected and `link`,
/// `penalty` and `m_set` are required. Indices in the file are 1-based.
struct RunConfig {
    ModelSpec spec;          // hypothesis set when C and a numeric t are given
    CrossFitConfig method;
    std::optional<MatrixXd> hypothesis_c;
    std::optional<VectorXd> hypothesis_t;
    bool self_test = false;  // "t": "estimate" -> t = beta_hat_M
    double level = 0.05;
    std::optional<VectorXd> drift;
    std::string data_path;
    std::string out_path;
    std::uint64_t seed = 1;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);

// H0 with t filled in; in self-test mode t is read off beta.
HypothesisSpec resolve_hypothesis(const RunConfig& cfg, const VectorXd& beta);

struct ScenarioFile {
    ExperimentKind experiment = ExperimentKind::rate;
    ScenarioConfig scenario;
    std::string out_dir;
};

ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::string& path);

}  // namespace pgee

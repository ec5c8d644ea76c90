#pragma once

#include "pgee/config.hpp"
#include "pgee/model.hpp"

#include <string>

namespace pgee {

enum ExitCode { exit_ok = 0, exit_input = 2, exit_numerical = 3 };

// A JSON report (pretty-printed, trailing newline) and the exit status it implies.
struct Report {
    std::string json;
    int status = exit_ok;
};

// `timestamp` is the only field that varies between identical runs.
Report fit_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp);
Report screen_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp);
Report crossfit_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp);
Report test_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp);

struct SimulationOutput {
    std::string metrics_csv;
    std::string summary_json;
};

SimulationOutput simulate_report(const ScenarioFile& scenario, const std::string& timestamp);

// ISO 8601 UTC.
std::string utc_timestamp();

// Entry point of the `pgee` executable.
int cli_main(int argc, char** argv);

}  // namespace pgee

#pragma once

#include "pgee/crossfit.hpp"
#include "pgee/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pgee {

enum class CovarianceFamily { homoscedastic, diag_exp, exchangeable_varying };
enum class ErrorDistribution { gaussian, bounded };
enum class ExperimentKind { rate, support, screening, kernel_rate, size, power };

CovarianceFamily covariance_family_from_name(std::string_view name);
ErrorDistribution error_distribution_from_name(std::string_view name);
ExperimentKind experiment_from_name(std::string_view name);
const char* to_string(CovarianceFamily f);
const char* to_string(ErrorDistribution e);
const char* to_string(ExperimentKind e);

struct ScenarioConfig {
    int n = 200;
    std::vector<int> n_values = {200, 800};  // rate and kernel_rate compare two sizes
    int p = 50;
    int l = 2;
    int s = 3;
    int m = 2;
    std::string link = "identity";
    PenaltyKind penalty = PenaltyKind::scad;
    CovarianceFamily family = CovarianceFamily::diag_exp;
    IndexSet active_set = {0};
    double signal = 1.0;        // magnitude of the s nonzeros
    double cov_strength = 1.0;  // a in exp(a * mean)
    double sigma2 = 1.0;
    double rho = 0.0;           // homoscedastic within-unit correlation
    double m_value = 0.0;       // beta0 on M before the drift
    std::vector<double> drift;  // h; beta0_M += h / sqrt(n) when set
    ErrorDistribution errors = ErrorDistribution::gaussian;
    double level = 0.05;
    std::uint64_t seed = 1;
    int reps = 100;
    int threads = 1;
    CrossFitConfig method;  // solver, tuning, screening and kernel settings
};

// Throws InputError on inconsistent settings.
void validate(const ScenarioConfig& cfg);

struct SimulatedData {
    Dataset data;
    VectorXd beta0;
    IndexSet m_set;
    IndexSet support;                 // S: nonzeros outside M
    std::vector<MatrixXd> sigmas;     // true Sigma(X_i,A)
};

// beta0 for sample size n: M = {0..m-1}; S drawn once from cfg.seed.
VectorXd true_beta(const ScenarioConfig& cfg, int n, IndexSet* support = nullptr);

// Sigma(z) for z = vec(X_A) in CovarianceModel's layout.
MatrixXd true_covariance(const ScenarioConfig& cfg, const VectorXd& z);
MatrixXd true_covariance(const ScenarioConfig& cfg, const ObservationBlock& block);

SimulatedData generate(const ScenarioConfig& cfg, int n, std::uint64_t seed);

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::rate;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // one per replication
    std::vector<std::pair<std::string, double>> summary;
    std::vector<std::string> failures;

    double summary_value(std::string_view key) const;
    std::string to_csv() const;
};

/// Replication r uses seed stream_seed(cfg.seed, r + 1). A replication that
/// throws is recorded in `failures` and its row is marked failed = 1.
ExperimentResult run_experiment(ExperimentKind kind, const ScenarioConfig& cfg);

// Linear-interpolated sample quantile; NaNs are dropped.
double quantile(std::vector<double> values, double q);

// sup_t |F_n(t) - t| for values in [0, 1].
double ks_uniform_distance(std::vector<double> values);

}  // namespace pgee

#include "pgee/simulation.hpp"

#include "pgee/errors.hpp"
#include "pgee/parallel.hpp"
#include "pgee/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pgee {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class E, size_t N>
E parse_enum(std::string_view name, const std::pair<const char*, E> (&table)[N],
             const char* what) {
    for (const auto& [key, value] : table) {
        if (name == key) return value;
    }
    throw InputError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

const std::pair<const char*, CovarianceFamily> kFamilies[] = {
    {"homoscedastic", CovarianceFamily::homoscedastic},
    {"diag_exp", CovarianceFamily::diag_exp},
    {"exchangeable_varying", CovarianceFamily::exchangeable_varying},
};
const std::pair<const char*, ErrorDistribution> kErrors[] = {
    {"gaussian", ErrorDistribution::gaussian},
    {"bounded", ErrorDistribution::bounded},
};
const std::pair<const char*, ExperimentKind> kExperiments[] = {
    {"rate", ExperimentKind::rate},         {"support", ExperimentKind::support},
    {"screening", ExperimentKind::screening}, {"kernel_rate", ExperimentKind::kernel_rate},
    {"size", ExperimentKind::size},         {"power", ExperimentKind::power},
};

template <class E, size_t N>
const char* enum_name(E value, const std::pair<const char*, E> (&table)[N]) {
    for (const auto& [key, v] : table) {
        if (v == value) return key;
    }
    return "?";
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

CovarianceFamily covariance_family_from_name(std::string_view name) {
    return parse_enum(name, kFamilies, "covariance family");
}
ErrorDistribution error_distribution_from_name(std::string_view name) {
    return parse_enum(name, kErrors, "error distribution");
}
ExperimentKind experiment_from_name(std::string_view name) {
    return parse_enum(name, kExperiments, "experiment");
}
const char* to_string(CovarianceFamily f) { return enum_name(f, kFamilies); }
const char* to_string(ErrorDistribution e) { return enum_name(e, kErrors); }
const char* to_string(ExperimentKind e) { return enum_name(e, kExperiments); }

void validate(const ScenarioConfig& cfg) {
    if (cfg.p < 1 || cfg.l < 1) throw InputError("scenario needs p >= 1 and l >= 1");
    if (cfg.s < 0 || cfg.m < 0 || cfg.s + cfg.m > cfg.p) {
        throw InputError("scenario needs s, m >= 0 and s + m <= p");
    }
    if (cfg.n < 4) throw InputError("scenario needs n >= 4");
    for (int n : cfg.n_values) {
        if (n < 4) throw InputError("every entry of n_values must be >= 4");
    }
    for (int j : cfg.active_set) {
        if (j < 0 || j >= cfg.p) throw InputError("active set index outside [1, p]");
    }
    if (!std::is_sorted(cfg.active_set.begin(), cfg.active_set.end()) ||
        std::adjacent_find(cfg.active_set.begin(), cfg.active_set.end()) !=
            cfg.active_set.end()) {
        throw InputError("active set must be sorted and duplicate-free");
    }
    if (!cfg.drift.empty() && static_cast<int>(cfg.drift.size()) != cfg.m) {
        throw InputError("drift must have length m");
    }
    if (!(cfg.sigma2 > 0.0)) throw InputError("sigma2 must be positive");
    if (!(cfg.rho > -1.0 / std::max(1, cfg.l - 1) && cfg.rho < 1.0)) {
        throw InputError("rho outside the positive definite range");
    }
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("level must lie in (0, 1)");
    if (cfg.reps < 1) throw InputError("reps must be >= 1");
    if (cfg.threads < 1) throw InputError("threads must be >= 1");
    LinkFunction::from_name(cfg.link);
}

VectorXd true_beta(const ScenarioConfig& cfg, int n, IndexSet* support) {
    VectorXd beta = VectorXd::Zero(cfg.p);
    for (int j = 0; j < cfg.m; ++j) {
        beta(j) = cfg.m_value;
        if (!cfg.drift.empty()) beta(j) += cfg.drift[static_cast<size_t>(j)] / std::sqrt(n);
    }
    std::vector<int> pool(static_cast<size_t>(cfg.p - cfg.m));
    std::iota(pool.begin(), pool.end(), cfg.m);
    Rng rng(stream_seed(cfg.seed, 0));
    rng.shuffle(pool);
    IndexSet s(pool.begin(), pool.begin() + cfg.s);
    std::sort(s.begin(), s.end());
    for (int j : s) beta(j) = (rng.below(2) == 0 ? 1.0 : -1.0) * cfg.signal;
    if (support) *support = s;
    return beta;
}

MatrixXd true_covariance(const ScenarioConfig& cfg, const VectorXd& z) {
    const int l = cfg.l;
    const auto a_size = static_cast<int>(cfg.active_set.size());
    if (z.size() != l * a_size) throw InputError("feature vector has wrong length");
    MatrixXd sigma = MatrixXd::Zero(l, l);
    switch (cfg.family) {
        case CovarianceFamily::homoscedastic:
            sigma.setConstant(cfg.rho);
            sigma.diagonal().setOnes();
            sigma *= cfg.sigma2;
            break;
        case CovarianceFamily::diag_exp:
            for (int k = 0; k < l; ++k) {
                const double mean = a_size == 0 ? 0.0 : z.segment(k * a_size, a_size).mean();
                sigma(k, k) = cfg.sigma2 * std::exp(cfg.cov_strength * mean);
            }
            break;
        case CovarianceFamily::exchangeable_varying: {
            const double mean = a_size == 0 ? 0.0 : z.mean();
            const double r = 0.3 * sigmoid(mean);
            sigma.setConstant(r);
            sigma.diagonal().setOnes();
            sigma *= cfg.sigma2 * std::exp(cfg.cov_strength * mean);
            break;
        }
    }
    return sigma;
}

MatrixXd true_covariance(const ScenarioConfig& cfg, const ObservationBlock& block) {
    return true_covariance(cfg, active_features(block, cfg.active_set));
}

SimulatedData generate(const ScenarioConfig& cfg, int n, std::uint64_t seed) {
    validate(cfg);
    if (n < 1) throw InputError("sample size must be positive");
    const auto link = LinkFunction::from_name(cfg.link);
    SimulatedData out;
    out.beta0 = true_beta(cfg, n, &out.support);
    for (int j = 0; j < cfg.m; ++j) out.m_set.push_back(j);

    Rng rng(seed);
    const double bound = std::sqrt(3.0);
    std::vector<ObservationBlock> blocks;
    blocks.reserve(static_cast<size_t>(n));
    out.sigmas.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        MatrixXd x(cfg.p, cfg.l);
        for (int k = 0; k < cfg.l; ++k) {
            for (int j = 0; j < cfg.p; ++j) x(j, k) = rng.uniform(-1.0, 1.0);
        }
        VectorXd eps(cfg.l);
        for (int k = 0; k < cfg.l; ++k) {
            eps(k) = cfg.errors == ErrorDistribution::gaussian ? rng.normal()
                                                               : rng.uniform(-bound, bound);
        }
        ObservationBlock probe;
        probe.x = x;
        MatrixXd sigma = true_covariance(cfg, active_features(probe, cfg.active_set));
        const Eigen::LLT<MatrixXd> chol(sigma);
        if (chol.info() != Eigen::Success) throw NumericalError("true covariance is not SPD");
        VectorXd y = chol.matrixL() * eps;
        const VectorXd eta = x.transpose() * out.beta0;
        for (int k = 0; k < cfg.l; ++k) y(k) += link.value(eta(k));
        blocks.emplace_back(std::move(y), std::move(x), i + 1);
        out.sigmas.push_back(std::move(sigma));
    }
    out.data = Dataset(std::move(blocks));
    return out;
}

double quantile(std::vector<double> values, double q) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double ks_uniform_distance(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(),
                                [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return kNaN;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - v, v - static_cast<double>(i) / n});
    }
    return d;
}

double ExperimentResult::summary_value(std::string_view key) const {
    for (const auto& [k, v] : summary) {
        if (k == key) return v;
    }
    throw InputError("no summary entry '" + std::string(key) + "'");
}

std::string ExperimentResult::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    for (size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
    os << '\n';
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            if (std::isnan(row[c])) {
                os << "NA";
            } else {
                os << row[c];
            }
        }
        os << '\n';
    }
    return os.str();
}

namespace {

ModelSpec model_spec(const ScenarioConfig& cfg) {
    ModelSpec spec;
    spec.link = LinkFunction::from_name(cfg.link);
    spec.penalty = PenaltyConfig::make(cfg.penalty, 0.0);
    for (int j = 0; j < cfg.m; ++j) spec.m_set.push_back(j);
    if (cfg.m > 0) {
        HypothesisSpec hyp;
        hyp.C = MatrixXd::Identity(cfg.m, cfg.m);
        hyp.t = VectorXd::Constant(cfg.m, cfg.m_value);
        hyp.m_set = spec.m_set;
        spec.hypothesis = hyp;
    }
    return spec;
}

CrossFitConfig method_for(const ScenarioConfig& cfg, std::uint64_t seed) {
    CrossFitConfig method = cfg.method;
    method.seed = seed;
    method.threads = 1;
    return method;
}

// Penalized coordinates outside `support` that are nonzero, and members of
// `support` that are zero.
std::pair<int, int> support_errors(const VectorXd& beta, const IndexSet& m_set,
                                   const IndexSet& support, double threshold) {
    int false_pos = 0;
    int false_neg = 0;
    for (int j = 0; j < beta.size(); ++j) {
        if (contains(m_set, j)) continue;
        const bool nonzero = std::abs(beta(j)) > threshold;
        if (contains(support, j)) {
            false_neg += nonzero ? 0 : 1;
        } else {
            false_pos += nonzero ? 1 : 0;
        }
    }
    return {false_pos, false_neg};
}

std::vector<VectorXd> grid_points(int dim, double lo, double hi, int max_points) {
    std::vector<VectorXd> grid;
    if (dim == 0) {
        grid.emplace_back(0);
        return grid;
    }
    int per_dim = 2;
    while (std::pow(per_dim + 1, dim) <= max_points && per_dim < 9) ++per_dim;
    const auto total = static_cast<int>(std::pow(per_dim, dim));
    for (int idx = 0; idx < total; ++idx) {
        VectorXd z(dim);
        int rest = idx;
        for (int d = 0; d < dim; ++d) {
            z(d) = lo + (hi - lo) * (rest % per_dim) / (per_dim - 1);
            rest /= per_dim;
        }
        grid.push_back(std::move(z));
    }
    return grid;
}

using RowFn = std::vector<double> (*)(const ScenarioConfig&, std::uint64_t);

std::vector<double> rate_row(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto spec = model_spec(cfg);
    const auto method = method_for(cfg, seed);
    std::vector<double> row;
    for (size_t a = 0; a < cfg.n_values.size(); ++a) {
        const auto sim = generate(cfg, cfg.n_values[a], stream_seed(seed, a));
        const auto fit = initial_fit(sim.data, spec, method).fit;
        row.push_back((fit.beta.beta - sim.beta0).norm());
        const auto [fp, fn] =
            support_errors(fit.beta.beta, sim.m_set, sim.support, cfg.method.solver.zero_threshold);
        row.push_back(fp == 0 ? 1.0 : 0.0);
        (void)fn;
    }
    return row;
}

std::vector<double> support_row(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto spec = model_spec(cfg);
    const auto sim = generate(cfg, cfg.n, stream_seed(seed, 0));
    const auto fit = initial_fit(sim.data, spec, method_for(cfg, seed)).fit;
    const auto [fp, fn] =
        support_errors(fit.beta.beta, sim.m_set, sim.support, cfg.method.solver.zero_threshold);
    return {fp == 0 ? 1.0 : 0.0, fp == 0 && fn == 0 ? 1.0 : 0.0, static_cast<double>(fp),
            static_cast<double>(fn), (fit.beta.beta - sim.beta0).norm()};
}

std::vector<double> screening_row(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto spec = model_spec(cfg);
    const auto method = method_for(cfg, seed);
    const auto sim = generate(cfg, cfg.n, stream_seed(seed, 0));
    const auto fit = initial_fit(sim.data, spec, method).fit;
    const auto cal = calibrate_fold(sim.data, fit.beta.beta, spec, method, 1);
    const auto& found = cal.screening.union_set;
    int fp = 0;
    for (int j : found) fp += contains(cfg.active_set, j) ? 0 : 1;
    int fn = 0;
    for (int j : cfg.active_set) fn += contains(found, j) ? 0 : 1;
    return {found == cfg.active_set ? 1.0 : 0.0, found.empty() ? 0.0 : 1.0,
            static_cast<double>(found.size()), static_cast<double>(fp), static_cast<double>(fn)};
}

std::vector<double> kernel_row(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto link = LinkFunction::from_name(cfg.link);
    const int dim = cfg.l * static_cast<int>(cfg.active_set.size());
    const auto grid = grid_points(dim, -0.5, 0.5, 400);
    const auto truth = [&cfg](const VectorXd& z) { return true_covariance(cfg, z); };
    std::vector<double> row;
    for (size_t a = 0; a < cfg.n_values.size(); ++a) {
        const auto sim = generate(cfg, cfg.n_values[a], stream_seed(seed, a));
        std::vector<VectorXd> residuals;
        for (const auto& block : sim.data.blocks()) {
            residuals.push_back(residual(block, sim.beta0, link));
        }
        const auto model =
            CovarianceModel::fit(sim.data, residuals, cfg.active_set, 1, cfg.method.kernel);
        row.push_back(sup_error(model, truth, grid));
    }
    row.push_back(row.size() >= 2 && row[row.size() - 1] < row[0] ? 1.0 : 0.0);
    return row;
}

std::vector<double> wald_row(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto spec = model_spec(cfg);
    if (!spec.hypothesis) throw InputError("size and power experiments need m >= 1");
    const auto& hyp = *spec.hypothesis;
    const auto method = method_for(cfg, seed);
    const auto sim = generate(cfg, cfg.n, stream_seed(seed, 0));
    const int n = sim.data.n();
    std::optional<VectorXd> drift;
    if (!cfg.drift.empty()) drift = Eigen::Map<const VectorXd>(cfg.drift.data(), cfg.m);

    const auto cf = run_crossfit(sim.data, spec, method);
    const auto cf_cov = crossfit_sandwich(sim.data, cf, spec.link);
    const VectorXd cf_m = cf.beta_hat.head(cfg.m);
    const auto cf_wald = wald(cf_m, hyp, restrict_to(cf_cov.omega, cf_cov.support, hyp.m_set), n, drift);

    const auto wi = working_independence_fit(sim.data, spec, method);
    const VectorXd wi_m = wi.initial.fit.beta.beta.head(cfg.m);
    const auto wi_wald = wald(wi_m, hyp, restrict_to(wi.covariance.omega, wi.support, hyp.m_set), n, drift);

    return {cf_wald.statistic,
            cf_wald.p_value,
            cf_wald.p_value < cfg.level ? 1.0 : 0.0,
            wi_wald.statistic,
            wi_wald.p_value,
            wi_wald.p_value < cfg.level ? 1.0 : 0.0,
            cf_wald.noncentrality,
            wi_wald.noncentrality,
            static_cast<double>(cf.hygiene_violations)};
}

double mean_of(const std::vector<std::vector<double>>& rows, size_t col) {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : rows) {
        if (row[1] == 0.0 && !std::isnan(row[col])) {
            sum += row[col];
            ++count;
        }
    }
    return count == 0 ? kNaN : sum / count;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, size_t col) {
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row[1] == 0.0) out.push_back(row[col]);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(ExperimentKind kind, const ScenarioConfig& cfg) {
    validate(cfg);
    ExperimentResult out;
    out.kind = kind;
    std::vector<std::string> metrics;
    RowFn fn = nullptr;
    switch (kind) {
        case ExperimentKind::rate:
        case ExperimentKind::kernel_rate:
            if (cfg.n_values.size() != 2) throw InputError("n_values must hold two sample sizes");
            break;
        default:
            break;
    }
    switch (kind) {
        case ExperimentKind::rate:
            metrics = {"error_n1", "off_support_zero_n1", "error_n2", "off_support_zero_n2"};
            fn = rate_row;
            break;
        case ExperimentKind::support:
            metrics = {"off_support_zero", "exact_support", "false_pos", "false_neg", "error"};
            fn = support_row;
            break;
        case ExperimentKind::screening:
            metrics = {"exact", "nonempty", "size", "false_pos", "false_neg"};
            fn = screening_row;
            break;
        case ExperimentKind::kernel_rate:
            metrics = {"sup_error_n1", "sup_error_n2", "improved"};
            fn = kernel_row;
            break;
        case ExperimentKind::size:
        case ExperimentKind::power:
            metrics = {"wald_cf", "p_cf", "reject_cf", "wald_wi", "p_wi",
                       "reject_wi", "delta_cf", "delta_wi", "hygiene_violations"};
            fn = wald_row;
            break;
    }
    out.columns = {"rep", "failed"};
    out.columns.insert(out.columns.end(), metrics.begin(), metrics.end());
    out.rows.assign(static_cast<size_t>(cfg.reps), {});
    std::vector<std::string> errors(static_cast<size_t>(cfg.reps));

    parallel_for(cfg.reps, cfg.threads, [&](int r) {
        auto& row = out.rows[static_cast<size_t>(r)];
        row = {static_cast<double>(r + 1), 0.0};
        try {
            const auto values = fn(cfg, stream_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1));
            row.insert(row.end(), values.begin(), values.end());
        } catch (const std::exception& e) {
            row[1] = 1.0;
            row.resize(out.columns.size(), kNaN);
            errors[static_cast<size_t>(r)] = "replication " + std::to_string(r + 1) + ": " + e.what();
        }
    });
    for (auto& e : errors) {
        if (!e.empty()) out.failures.push_back(std::move(e));
    }

    auto& sm = out.summary;
    sm.emplace_back("replications", cfg.reps);
    sm.emplace_back("failed", static_cast<double>(out.failures.size()));
    switch (kind) {
        case ExperimentKind::rate: {
            const double m1 = quantile(column(out.rows, 2), 0.5);
            const double m2 = quantile(column(out.rows, 4), 0.5);
            sm.emplace_back("median_error_n1", m1);
            sm.emplace_back("median_error_n2", m2);
            sm.emplace_back("median_error_ratio", m1 / m2);
            sm.emplace_back("off_support_zero_rate_n1", mean_of(out.rows, 3));
            sm.emplace_back("off_support_zero_rate_n2", mean_of(out.rows, 5));
            break;
        }
        case ExperimentKind::support:
            sm.emplace_back("off_support_zero_rate", mean_of(out.rows, 2));
            sm.emplace_back("exact_support_rate", mean_of(out.rows, 3));
            sm.emplace_back("mean_false_pos", mean_of(out.rows, 4));
            sm.emplace_back("mean_false_neg", mean_of(out.rows, 5));
            sm.emplace_back("median_error", quantile(column(out.rows, 6), 0.5));
            break;
        case ExperimentKind::screening:
            sm.emplace_back("exact_recovery_rate", mean_of(out.rows, 2));
            sm.emplace_back("nonempty_rate", mean_of(out.rows, 3));
            sm.emplace_back("mean_size", mean_of(out.rows, 4));
            sm.emplace_back("mean_false_pos", mean_of(out.rows, 5));
            sm.emplace_back("mean_false_neg", mean_of(out.rows, 6));
            break;
        case ExperimentKind::kernel_rate:
            sm.emplace_back("median_sup_error_n1", quantile(column(out.rows, 2), 0.5));
            sm.emplace_back("median_sup_error_n2", quantile(column(out.rows, 3), 0.5));
            sm.emplace_back("improvement_rate", mean_of(out.rows, 4));
            break;
        case ExperimentKind::size:
        case ExperimentKind::power:
            sm.emplace_back("rejection_rate_cf", mean_of(out.rows, 4));
            sm.emplace_back("rejection_rate_wi", mean_of(out.rows, 7));
            sm.emplace_back("ks_distance_cf", ks_uniform_distance(column(out.rows, 3)));
            sm.emplace_back("ks_distance_wi", ks_uniform_distance(column(out.rows, 6)));
            sm.emplace_back("median_delta_cf", quantile(column(out.rows, 8), 0.5));
            sm.emplace_back("median_delta_wi", quantile(column(out.rows, 9), 0.5));
            sm.emplace_back("hygiene_violations", mean_of(out.rows, 10) * (cfg.reps - out.failures.size()));
            break;
    }
    return out;
}

}  // namespace pgee

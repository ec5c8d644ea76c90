#include "pgee/cli.hpp"

#include "pgee/crossfit.hpp"
#include "pgee/errors.hpp"
#include "pgee/inference.hpp"
#include "pgee/io.hpp"
#include "pgee/parallel.hpp"
#include "pgee/screening.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace pgee {

namespace {

using Json = nlohmann::ordered_json;

Json vec_json(const VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Json mat_json(const MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_json(m.row(r).transpose()));
    return out;
}

Json index_json(const IndexSet& set) {
    Json out = Json::array();
    for (int j : set) out.push_back(j + 1);
    return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

VectorXd take(const VectorXd& beta, const IndexSet& set) {
    VectorXd out(static_cast<Eigen::Index>(set.size()));
    for (size_t a = 0; a < set.size(); ++a) out(static_cast<Eigen::Index>(a)) = beta(set[a]);
    return out;
}

void check_shapes(const Dataset& data, const RunConfig& cfg) {
    for (int j : cfg.spec.m_set) {
        if (j >= data.p()) throw InputError("m_set index " + std::to_string(j + 1) + " exceeds p");
    }
}

Json header(const char* command, const Dataset& data, const RunConfig& cfg,
            const std::string& timestamp) {
    Json j;
    j["command"] = command;
    j["timestamp"] = timestamp;
    j["seed"] = cfg.seed;
    j["n"] = data.n();
    j["p"] = data.p();
    j["l"] = data.l();
    j["link"] = cfg.spec.link.name();
    j["penalty"] = to_string(cfg.spec.penalty.kind);
    j["penalty_a"] = cfg.spec.penalty.a;
    j["m_set"] = index_json(cfg.spec.m_set);
    return j;
}

Json fit_json(const FitResult& fit, const std::vector<double>& lambdas,
              const std::vector<double>& criterion) {
    Json j;
    j["lambda"] = fit.lambda_n;
    j["coefficients"] = vec_json(fit.beta.beta);
    j["support"] = index_json(fit.beta.support);
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["final_update_norm"] = fit.final_update_norm;
    j["equation_norm_on_support"] = fit.equation_norm_on_support;
    j["off_support_equation_norm"] = fit.off_support_equation_norm;
    if (!lambdas.empty()) {
        j["tuning"] = {{"lambdas", lambdas}, {"criterion", criterion}};
    }
    return j;
}

Json screening_json(const ScreeningResult& s) {
    Json j;
    j["critical_value"] = s.critical_value;
    Json per_k = Json::array();
    for (const auto& a : s.active_sets) per_k.push_back(index_json(a));
    j["active_sets"] = per_k;
    j["active_set"] = index_json(s.union_set);
    j["w_stats"] = mat_json(s.w_stats);
    j["jittered"] = s.jittered;
    j["degenerate"] = s.degenerate;
    return j;
}

Json wald_json(const WaldReport& w, const HypothesisSpec& hyp, double level) {
    Json j;
    j["C"] = mat_json(hyp.C);
    j["t"] = vec_json(hyp.t);
    j["statistic"] = w.statistic;
    j["df"] = w.df;
    j["p_value"] = w.p_value;
    j["noncentrality"] = w.noncentrality;
    j["contrast"] = vec_json(w.contrast);
    j["level"] = level;
    j["reject"] = w.p_value < level;
    return j;
}

Json design_warnings(const Dataset& data) {
    Json out = Json::array();
    for (const auto& w : data.check_design_bound()) out.push_back(w);
    return out;
}

struct CrossFitOutcome {
    CrossFitResult result;
    SandwichCovariance covariance;
    MatrixXd omega_m;
    std::optional<HypothesisSpec> hypothesis;
    std::optional<WaldReport> wald;
};

CrossFitOutcome crossfit_with_wald(const Dataset& data, const RunConfig& cfg) {
    CrossFitOutcome out;
    out.result = run_crossfit(data, cfg.spec, cfg.method);
    out.covariance = crossfit_sandwich(data, out.result, cfg.spec.link);
    out.omega_m = restrict_to(out.covariance.omega, out.covariance.support, cfg.spec.m_set);
    if (cfg.hypothesis_c) {
        out.hypothesis = resolve_hypothesis(cfg, out.result.beta_hat);
        out.wald = wald(take(out.result.beta_hat, cfg.spec.m_set), *out.hypothesis, out.omega_m,
                        data.n(), cfg.drift);
    }
    return out;
}

Json crossfit_json(const Dataset& data, const RunConfig& cfg, const CrossFitOutcome& o) {
    const auto& r = o.result;
    Json folds = Json::array();
    for (const auto& f : r.folds) {
        Json j;
        j["fold"] = f.fold;
        Json ids = Json::array();
        for (int pos : f.positions) ids.push_back(data[pos].unit_id);
        j["unit_ids"] = ids;
        j["initial"] = fit_json(f.initial.fit, f.initial.lambdas, f.initial.criterion);
        j["screening"] = screening_json(f.calibration.screening);
        j["bandwidth"] = f.calibration.model ? f.calibration.model->bandwidth() : 0.0;
        j["pooled_fallback"] = f.calibration.pooled_fallback;
        j["refit"] = fit_json(f.refit.fit, f.refit.lambdas, f.refit.criterion);
        folds.push_back(j);
    }
    Json j;
    j["folds"] = folds;
    j["beta_hat"] = vec_json(r.beta_hat);
    j["support"] = index_json(r.support);
    j["omega_m"] = mat_json(o.omega_m);
    if (o.wald) j["wald"] = wald_json(*o.wald, *o.hypothesis, cfg.level);
    j["hygiene"] = {{"audited_evaluations", r.audit.entries.size()},
                    {"violations", r.hygiene_violations}};
    j["diagnostics"] = r.diagnostics;
    return j;
}

bool all_converged(const CrossFitResult& r) {
    for (const auto& f : r.folds) {
        if (!f.initial.fit.converged || !f.refit.fit.converged) return false;
    }
    return true;
}

}  // namespace

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Report fit_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp) {
    check_shapes(data, cfg);
    const auto init = initial_fit(data, cfg.spec, cfg.method);
    Json j = header("fit", data, cfg, timestamp);
    j["fit"] = fit_json(init.fit, init.lambdas, init.criterion);
    Json diag = design_warnings(data);
    if (!init.fit.converged) diag.push_back("solver did not converge");
    j["diagnostics"] = diag;
    return {dump(j), init.fit.converged ? exit_ok : exit_numerical};
}

Report screen_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp) {
    check_shapes(data, cfg);
    const auto init = initial_fit(data, cfg.spec, cfg.method);
    std::vector<VectorXd> residuals;
    for (const auto& block : data.blocks()) {
        residuals.push_back(residual(block, init.fit.beta.beta, cfg.spec.link));
    }
    const auto basis = BasisFamily::powers(cfg.method.screening.basis_count);
    const auto screening = screen_covariance(data, residuals, basis, cfg.method.screening);
    Json j = header("screen", data, cfg, timestamp);
    j["fit"] = fit_json(init.fit, init.lambdas, init.criterion);
    j["screening"] = screening_json(screening);
    Json diag = design_warnings(data);
    if (!init.fit.converged) diag.push_back("solver did not converge");
    j["diagnostics"] = diag;
    return {dump(j), init.fit.converged ? exit_ok : exit_numerical};
}

Report crossfit_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp) {
    check_shapes(data, cfg);
    const auto outcome = crossfit_with_wald(data, cfg);
    Json j = header("crossfit", data, cfg, timestamp);
    j.update(crossfit_json(data, cfg, outcome));
    return {dump(j), all_converged(outcome.result) ? exit_ok : exit_numerical};
}

Report test_report(const Dataset& data, const RunConfig& cfg, const std::string& timestamp) {
    check_shapes(data, cfg);
    if (!cfg.hypothesis_c) throw InputError("missing config key 'hypothesis'");
    const auto outcome = crossfit_with_wald(data, cfg);
    const auto wi = working_independence_fit(data, cfg.spec, cfg.method);
    const MatrixXd wi_omega = restrict_to(wi.covariance.omega, wi.support, cfg.spec.m_set);
    const auto wi_hyp = resolve_hypothesis(cfg, wi.initial.fit.beta.beta);
    const auto wi_wald =
        wald(take(wi.initial.fit.beta.beta, cfg.spec.m_set), wi_hyp, wi_omega, data.n(), cfg.drift);

    Json j = header("test", data, cfg, timestamp);
    Json cf;
    cf["beta_m"] = vec_json(take(outcome.result.beta_hat, cfg.spec.m_set));
    cf["omega_m"] = mat_json(outcome.omega_m);
    cf["wald"] = wald_json(*outcome.wald, *outcome.hypothesis, cfg.level);
    cf["hygiene_violations"] = outcome.result.hygiene_violations;
    j["crossfit"] = cf;
    Json ind;
    ind["beta_m"] = vec_json(take(wi.initial.fit.beta.beta, cfg.spec.m_set));
    ind["omega_m"] = mat_json(wi_omega);
    ind["wald"] = wald_json(wi_wald, wi_hyp, cfg.level);
    j["working_independence"] = ind;
    if (cfg.drift) {
        const auto pc = power_compare(outcome.omega_m, wi_omega, *cfg.hypothesis_c, *cfg.drift,
                                      cfg.level);
        j["power"] = {{"power_crossfit", pc.power_crossfit},
                      {"power_independence", pc.power_initial},
                      {"delta_crossfit", pc.delta_crossfit},
                      {"delta_independence", pc.delta_initial},
                      {"dominance", pc.dominance}};
    }
    j["diagnostics"] = outcome.result.diagnostics;
    const bool ok = all_converged(outcome.result) && wi.initial.fit.converged;
    return {dump(j), ok ? exit_ok : exit_numerical};
}

SimulationOutput simulate_report(const ScenarioFile& file, const std::string& timestamp) {
    const auto& c = file.scenario;
    const auto result = run_experiment(file.experiment, c);
    Json j;
    j["command"] = "simulate";
    j["experiment"] = to_string(file.experiment);
    j["timestamp"] = timestamp;
    j["seed"] = c.seed;
    j["reps"] = c.reps;
    j["scenario"] = {{"n", c.n},
                     {"n_values", c.n_values},
                     {"p", c.p},
                     {"l", c.l},
                     {"s", c.s},
                     {"m", c.m},
                     {"link", c.link},
                     {"penalty", to_string(c.penalty)},
                     {"family", to_string(c.family)},
                     {"active_set", index_json(c.active_set)},
                     {"errors", to_string(c.errors)}};
    Json summary = Json::object();
    for (const auto& [key, value] : result.summary) summary[key] = value;
    j["summary"] = summary;
    j["failures"] = result.failures;
    return {result.to_csv(), dump(j)};
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Penalized estimating equations with cross-fitted covariance estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_path;
    std::string out_path;
    std::uint64_t seed = 1;
    int threads = default_threads();
    int reps = 0;

    struct Flags {
        CLI::Option* seed = nullptr;
        CLI::Option* reps = nullptr;
    } flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration")->required();
        sub->add_option("--out", out_path, "output path (stdout when omitted)");
        flags.seed = sub->add_option("--seed", seed, "overrides the configured seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    };
    std::vector<std::pair<CLI::App*, CLI::Option*>> seed_opts;
    CLI::App* data_cmds[4];
    const char* names[4] = {"fit", "screen", "crossfit", "test"};
    const char* help[4] = {"penalized fit under identity working covariance",
                           "covariance active-set screening",
                           "cross-fitted refit with optional Wald test",
                           "Wald test: cross-fit against working independence"};
    for (int c = 0; c < 4; ++c) {
        data_cmds[c] = app.add_subcommand(names[c], help[c]);
        add_common(data_cmds[c]);
        seed_opts.emplace_back(data_cmds[c], flags.seed);
        data_cmds[c]->add_option("--data", data_path, "long-format CSV");
    }
    auto* sim = app.add_subcommand("simulate", "Monte Carlo experiment from a scenario file");
    add_common(sim);
    seed_opts.emplace_back(sim, flags.seed);
    flags.reps = sim->add_option("--reps", reps, "overrides the configured replications")
                     ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_input;
    }

    bool seed_given = false;
    for (const auto& [sub, opt] : seed_opts) {
        if (sub->parsed() && opt->count() > 0) seed_given = true;
    }

    try {
        const std::string stamp = utc_timestamp();
        if (sim->parsed()) {
            auto file = load_scenario(config_path);
            if (seed_given) file.scenario.seed = seed;
            if (flags.reps->count() > 0) file.scenario.reps = reps;
            file.scenario.threads = threads;
            validate(file.scenario);
            const auto out = simulate_report(file, stamp);
            const std::string dir = out_path.empty() ? (file.out_dir.empty() ? "." : file.out_dir)
                                                     : out_path;
            std::filesystem::create_directories(dir);
            write_text((std::filesystem::path(dir) / "metrics.csv").string(), out.metrics_csv);
            write_text((std::filesystem::path(dir) / "summary.json").string(), out.summary_json);
            return exit_ok;
        }

        auto cfg = load_run_config(config_path);
        if (seed_given) {
            cfg.seed = seed;
            cfg.method.seed = seed;
        }
        cfg.method.threads = threads;
        const std::string data_file = data_path.empty() ? cfg.data_path : data_path;
        if (data_file.empty()) throw InputError("no data file: pass --data or set 'data'");
        const Dataset data = read_long_csv(data_file);
        Report report;
        if (data_cmds[0]->parsed()) {
            report = fit_report(data, cfg, stamp);
        } else if (data_cmds[1]->parsed()) {
            report = screen_report(data, cfg, stamp);
        } else if (data_cmds[2]->parsed()) {
            report = crossfit_report(data, cfg, stamp);
        } else {
            report = test_report(data, cfg, stamp);
        }
        write_text(out_path.empty() ? cfg.out_path : out_path, report.json);
        if (report.status == exit_numerical) std::cerr << "pgee: solver did not converge\n";
        return report.status;
    } catch (const InputError& e) {
        std::cerr << "pgee: " << e.what() << '\n';
        return exit_input;
    } catch (const NumericalError& e) {
        std::cerr << "pgee: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "pgee: " << e.what() << '\n';
        return exit_input;
    }
}

}  // namespace pgee

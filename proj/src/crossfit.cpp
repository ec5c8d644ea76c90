#include "pgee/crossfit.hpp"

#include "pgee/errors.hpp"
#include "pgee/parallel.hpp"
#include "pgee/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pgee {

FoldPlan split(int n, std::uint64_t seed) {
    if (n < 4) throw InputError("cross-fitting needs n >= 4");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stream_seed(seed, 0));
    rng.shuffle(order);
    FoldPlan plan;
    plan.rng_seed = seed;
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    plan.idx1.assign(order.begin(), order.begin() + half);
    plan.idx2.assign(order.begin() + half, order.end());
    std::sort(plan.idx1.begin(), plan.idx1.end());
    std::sort(plan.idx2.begin(), plan.idx2.end());
    return plan;
}

namespace {

void run_solver(const Dataset& fold, const ModelSpec& spec, const std::vector<MatrixXd>& inverses,
                const CrossFitConfig& cfg, const VectorXd& init, FitResult& fit,
                std::vector<double>& lambdas, std::vector<double>& criterion) {
    if (cfg.lambda) {
        SolverConfig c = cfg.solver;
        c.lambda_n = *cfg.lambda;
        fit = penalized_solve(fold, spec, inverses, c, init);
        return;
    }
    auto tuned = fit_tuned(fold, spec, inverses, cfg.solver, cfg.tuning, init);
    fit = std::move(tuned.fit);
    lambdas = std::move(tuned.lambdas);
    criterion = std::move(tuned.criterion);
}

std::vector<VectorXd> residuals_at(const Dataset& data, const VectorXd& beta,
                                   const LinkFunction& link) {
    std::vector<VectorXd> out;
    out.reserve(static_cast<size_t>(data.n()));
    for (const auto& block : data.blocks()) out.push_back(residual(block, beta, link));
    return out;
}

IndexSet support_of(const VectorXd& beta, const IndexSet& m_set, double threshold) {
    IndexSet s;
    for (int j = 0; j < beta.size(); ++j) {
        if (contains(m_set, j) || std::abs(beta(j)) > threshold) s.push_back(j);
    }
    return s;
}

}  // namespace

InitialFit initial_fit(const Dataset& fold, const ModelSpec& spec, const CrossFitConfig& cfg) {
    if (fold.n() < 1) throw InputError("fold is empty");
    const auto inverses = WorkingCovariance::identity().unit_inverses(fold);
    const VectorXd init = default_initial_value(fold, spec.link, cfg.init_ridge);
    InitialFit out;
    run_solver(fold, spec, inverses, cfg, init, out.fit, out.lambdas, out.criterion);
    return out;
}

Calibration calibrate_fold(const Dataset& fold, const VectorXd& beta_check, const ModelSpec& spec,
                           const CrossFitConfig& cfg, int fold_id) {
    if (beta_check.size() != fold.p()) throw InputError("beta_check has wrong length");
    const auto residuals = residuals_at(fold, beta_check, spec.link);
    Calibration out;
    const auto basis = BasisFamily::powers(cfg.screening.basis_count);
    out.screening = screen_covariance(fold, residuals, basis, cfg.screening);
    out.pooled_fallback = out.screening.union_set.empty();
    out.model = std::make_shared<const CovarianceModel>(
        CovarianceModel::fit(fold, residuals, out.screening.union_set, fold_id, cfg.kernel));
    return out;
}

Refit crossfit_refit(const Dataset& fold, const WorkingCovariance& cov, const ModelSpec& spec,
                     const CrossFitConfig& cfg, const VectorXd& init, EvaluationAudit* audit) {
    Refit out;
    out.inverses = cov.unit_inverses(fold, audit);
    run_solver(fold, spec, out.inverses, cfg, init, out.fit, out.lambdas, out.criterion);
    return out;
}

VectorXd aggregate(const VectorXd& b1, const VectorXd& b2) {
    if (b1.size() != b2.size()) throw InputError("fold estimates differ in length");
    return 0.5 * (b1 + b2);
}

CrossFitResult run_crossfit(const Dataset& data, const ModelSpec& spec, const CrossFitConfig& cfg) {
    CrossFitResult out;
    out.plan = split(data.n(), cfg.seed);
    Dataset fold_data[2] = {data.subset(out.plan.idx1), data.subset(out.plan.idx2)};
    for (int q = 0; q < 2; ++q) {
        out.folds[q].fold = q + 1;
        out.folds[q].positions = out.plan.fold(q + 1);
    }

    parallel_for(2, cfg.threads, [&](int q) {
        auto& report = out.folds[q];
        report.initial = initial_fit(fold_data[q], spec, cfg);
        report.calibration =
            calibrate_fold(fold_data[q], report.initial.fit.beta.beta, spec, cfg, q + 1);
    });

    EvaluationAudit audits[2];
    parallel_for(2, cfg.threads, [&](int q) {
        auto& report = out.folds[q];
        const auto cov = WorkingCovariance::estimated(out.folds[1 - q].calibration.model);
        report.refit = crossfit_refit(fold_data[q], cov, spec, cfg, report.initial.fit.beta.beta,
                                      &audits[q]);
    });
    for (const auto& a : audits) {
        out.audit.entries.insert(out.audit.entries.end(), a.entries.begin(), a.entries.end());
    }

    const VectorXd& b1 = out.folds[0].refit.fit.beta.beta;
    const VectorXd& b2 = out.folds[1].refit.fit.beta.beta;
    out.beta_hat = aggregate(b1, b2);
    out.support = support_of(out.beta_hat, spec.m_set, cfg.solver.zero_threshold);
    out.hygiene_violations = out.audit.violations() + count_hygiene_violations(out, data);

    for (int j = 0; j < data.p(); ++j) {
        const bool nz1 = b1(j) != 0.0;
        const bool nz2 = b2(j) != 0.0;
        if (nz1 != nz2) {
            out.diagnostics.push_back("support disagreement at coordinate " +
                                      std::to_string(j + 1));
        } else if (nz1 && (b1(j) > 0.0) != (b2(j) > 0.0)) {
            out.diagnostics.push_back("sign disagreement at coordinate " + std::to_string(j + 1));
        }
    }
    for (int q = 0; q < 2; ++q) {
        const auto& report = out.folds[q];
        const std::string tag = "fold " + std::to_string(q + 1) + ": ";
        if (!report.initial.fit.converged) out.diagnostics.push_back(tag + "initial fit did not converge");
        if (!report.refit.fit.converged) out.diagnostics.push_back(tag + "refit did not converge");
        if (report.calibration.pooled_fallback) {
            out.diagnostics.push_back(tag + "empty active set, pooled covariance used");
        }
    }
    return out;
}

int count_hygiene_violations(const CrossFitResult& result, const Dataset& data) {
    int violations = 0;
    for (int q = 0; q < 2; ++q) {
        const auto& model = result.folds[1 - q].calibration.model;
        if (!model) continue;
        if (model->fold_id() != 2 - q) ++violations;
        std::vector<int> own_ids;
        for (int pos : result.folds[1 - q].positions) own_ids.push_back(data[pos].unit_id);
        std::sort(own_ids.begin(), own_ids.end());
        for (int id : model->training_ids()) {
            if (!std::binary_search(own_ids.begin(), own_ids.end(), id)) ++violations;
        }
        for (int pos : result.folds[q].positions) {
            if (model->trained_on(data[pos].unit_id)) ++violations;
        }
    }
    return violations;
}

SandwichCovariance crossfit_sandwich(const Dataset& data, const CrossFitResult& result,
                                     const LinkFunction& link) {
    std::vector<MatrixXd> inverses(static_cast<size_t>(data.n()));
    for (const auto& report : result.folds) {
        if (report.refit.inverses.size() != report.positions.size()) {
            throw InputError("cross-fit result is missing refit weights");
        }
        for (size_t a = 0; a < report.positions.size(); ++a) {
            inverses[static_cast<size_t>(report.positions[a])] = report.refit.inverses[a];
        }
    }
    return sandwich(data, result.beta_hat, link, inverses, result.support);
}

IndependenceFit working_independence_fit(const Dataset& data, const ModelSpec& spec,
                                         const CrossFitConfig& cfg) {
    IndependenceFit out;
    out.initial = initial_fit(data, spec, cfg);
    out.support = support_of(out.initial.fit.beta.beta, spec.m_set, cfg.solver.zero_threshold);
    const auto inverses = WorkingCovariance::identity().unit_inverses(data);
    out.covariance = sandwich(data, out.initial.fit.beta.beta, spec.link, inverses, out.support);
    return out;
}

}  // namespace pgee

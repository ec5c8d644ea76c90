#include "pgee/solver.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pgee {

void HypothesisSpec::validate() const {
    if (C.rows() < 1) throw InputError("hypothesis needs at least one constraint");
    if (C.cols() != m()) {
        throw InputError("C has " + std::to_string(C.cols()) + " columns but |M| = " +
                         std::to_string(m()));
    }
    if (t.size() != C.rows()) throw InputError("t must have one entry per row of C");
    if (C.rows() > C.cols()) throw InputError("C must satisfy r <= m");
    Eigen::FullPivLU<MatrixXd> lu(C);
    if (lu.rank() < C.rows()) throw InputError("C must have full row rank");
}

namespace {

double max_abs(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

IndexSet initial_support(const VectorXd& beta, const IndexSet& m_set) {
    IndexSet s;
    for (int j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0 || contains(m_set, j)) s.push_back(j);
    }
    return s;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void fill_diagnostics(FitResult& out, const Dataset& data, const ModelSpec& spec,
                      const std::vector<MatrixXd>& inverses, const PenaltyConfig& pen) {
    const VectorXd u = estimating_function(data, out.beta.beta, spec.link, inverses);
    double on = 0.0;
    double off = 0.0;
    for (int j = 0; j < data.p(); ++j) {
        const bool in_m = contains(spec.m_set, j);
        const double b = out.beta.beta(j);
        if (in_m || b != 0.0) {
            const double pen_j = in_m ? 0.0 : sign(b) * penalty_derivative(b, pen);
            on = std::max(on, std::abs(u(j) - pen_j));
        } else {
            off = std::max(off, std::abs(u(j)));
        }
    }
    out.equation_norm_on_support = on;
    out.off_support_equation_norm = off;
}

}  // namespace

VectorXd default_initial_value(const Dataset& data, const LinkFunction& link, double ridge_rel) {
    const int p = data.p();
    double trace = 0.0;
    for (const auto& b : data.blocks()) trace += b.x.squaredNorm();
    trace /= static_cast<double>(data.n());
    const double kappa = std::max(ridge_rel * trace / p, 1e-12);

    const std::vector<MatrixXd> identity(static_cast<size_t>(data.n()),
                                         MatrixXd::Identity(data.l(), data.l()));
    IndexSet all(static_cast<size_t>(p));
    std::iota(all.begin(), all.end(), 0);

    VectorXd beta = VectorXd::Zero(p);
    auto residual_of = [&](const VectorXd& b) {
        return VectorXd(estimating_function(data, b, link, identity) - kappa * b);
    };
    VectorXd f = residual_of(beta);
    for (int iter = 0; iter < 50; ++iter) {
        const auto sys = estimating_system(data, beta, link, identity, all);
        MatrixXd a = -sys.jac_ss;
        a.diagonal().array() += kappa;
        const VectorXd delta = a.partialPivLu().solve(f);
        if (!delta.allFinite()) break;
        double step = 1.0;
        VectorXd candidate = beta + delta;
        VectorXd f_new = residual_of(candidate);
        for (int h = 0; h < 30 && !(f_new.allFinite() && f_new.norm() < f.norm()); ++h) {
            step *= 0.5;
            candidate = beta + step * delta;
            f_new = residual_of(candidate);
        }
        if (!f_new.allFinite()) break;
        beta = candidate;
        f = f_new;
        if (max_abs(step * delta) < 1e-10) break;
    }
    return beta;
}

namespace {

struct StartPoint {
    VectorXd beta;
    IndexSet support;
    EstimatingSystem system;
    // Identity link: dU/dbeta does not depend on beta, so it is formed once.
    MatrixXd constant_jacobian;
};

EstimatingSystem system_at(const Dataset& data, const ModelSpec& spec,
                           const std::vector<MatrixXd>& inverses, const StartPoint& start,
                           const VectorXd& beta, const IndexSet& support) {
    if (start.constant_jacobian.size() == 0) {
        return estimating_system(data, beta, spec.link, inverses, support);
    }
    EstimatingSystem sys;
    sys.u = estimating_function(data, beta, spec.link, inverses);
    sys.jac_ss = start.constant_jacobian(support, support);
    return sys;
}

// Thresholded start and its estimating system; shared by every lambda of a grid.
StartPoint start_point(const Dataset& data, const ModelSpec& spec,
                       const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                       const VectorXd& init) {
    const int p = data.p();
    if (init.size() != p) throw InputError("initial value has wrong length");
    if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InputError("invalid solver tolerances");
    for (int j : spec.m_set) {
        if (j < 0 || j >= p) throw InputError("unpenalized index outside [0, p)");
    }
    StartPoint sp;
    sp.beta = init;
    for (int j = 0; j < p; ++j) {
        if (!contains(spec.m_set, j) && std::abs(sp.beta(j)) < cfg.zero_threshold) sp.beta(j) = 0.0;
    }
    sp.support = initial_support(sp.beta, spec.m_set);
    if (spec.link.kind() == LinkKind::identity) {
        IndexSet all(static_cast<size_t>(p));
        std::iota(all.begin(), all.end(), 0);
        const auto full = estimating_system(data, sp.beta, spec.link, inverses, all);
        sp.constant_jacobian = full.jac_ss;
        sp.system.u = full.u;
        sp.system.jac_ss = sp.constant_jacobian(sp.support, sp.support);
    } else if (!sp.support.empty()) {
        sp.system = estimating_system(data, sp.beta, spec.link, inverses, sp.support);
    }
    return sp;
}

FitResult solve_from(const Dataset& data, const ModelSpec& spec,
                     const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                     const StartPoint& start) {
    PenaltyConfig pen = spec.penalty;
    pen.lambda = cfg.lambda_n;
    pen.validate();

    VectorXd beta = start.beta;
    IndexSet support = start.support;

    FitResult out;
    out.lambda_n = cfg.lambda_n;
    double previous_norm = std::numeric_limits<double>::infinity();
    double step = 1.0;
    // LQA converges only linearly onto coordinates held at |U_j| = rho';
    // once the updates are small the support is settled and Newton finishes.
    constexpr double kPolishSwitch = 1e-3;
    bool polish = false;
    for (out.iterations = 1; out.iterations <= cfg.max_iter; ++out.iterations) {
        if (support.empty()) {
            out.converged = true;
            out.final_update_norm = 0.0;
            break;
        }
        auto sys = out.iterations == 1
                       ? start.system
                       : system_at(data, spec, inverses, start, beta, support);
        if (out.iterations > 1 && pen.lambda > 0.0) {
            // A coordinate whose zero already satisfies the (linearized) KKT
            // bound is the limit LQA would approach geometrically; take it now.
            IndexSet kept;
            for (size_t q = 0; q < support.size(); ++q) {
                const int j = support[q];
                const auto qi = static_cast<Eigen::Index>(q);
                const double b = beta(j);
                if (!contains(spec.m_set, j) && std::abs(b) < pen.lambda &&
                    std::abs(sys.u(j) - sys.jac_ss(qi, qi) * b) < pen.lambda) {
                    beta(j) = 0.0;
                } else {
                    kept.push_back(j);
                }
            }
            if (kept.size() != support.size()) {
                support = std::move(kept);
                if (support.empty()) continue;
                sys = system_at(data, spec, inverses, start, beta, support);
            }
        }
        const auto s = static_cast<Eigen::Index>(support.size());
        MatrixXd a = -sys.jac_ss;
        VectorXd rhs(s);
        for (Eigen::Index q = 0; q < s; ++q) {
            const int j = support[static_cast<size_t>(q)];
            if (contains(spec.m_set, j)) {
                rhs(q) = sys.u(j);
            } else if (polish) {
                // Exact Newton on U_j - sign(b) rho'(|b|).
                a(q, q) += penalty_second_derivative(beta(j), pen);
                rhs(q) = sys.u(j) - sign(beta(j)) * penalty_derivative(beta(j), pen);
            } else {
                const double e = penalty_derivative(beta(j), pen) / std::abs(beta(j));
                a(q, q) += e;
                rhs(q) = sys.u(j) - e * beta(j);
            }
        }
        const double damping = cfg.ridge * std::max(std::abs(a.trace()) / s, 1e-300);
        a.diagonal().array() += damping;
        const VectorXd delta = a.partialPivLu().solve(rhs);
        if (!delta.allFinite()) break;

        const double norm = max_abs(delta);
        step = norm > previous_norm ? std::max(step * 0.5, 1.0 / 64) : 1.0;
        previous_norm = norm;

        IndexSet kept;
        for (Eigen::Index q = 0; q < s; ++q) {
            const int j = support[static_cast<size_t>(q)];
            const double before = beta(j);
            beta(j) += step * delta(q);
            const bool crossed = polish && sign(beta(j)) != sign(before);
            if (!contains(spec.m_set, j) && (crossed || std::abs(beta(j)) < cfg.zero_threshold)) {
                beta(j) = 0.0;
            } else {
                kept.push_back(j);
            }
        }
        const bool support_changed = kept.size() != support.size();
        support = std::move(kept);
        out.final_update_norm = step * norm;
        if (!polish && !support_changed && norm < kPolishSwitch) polish = true;
        if (!beta.allFinite()) break;
        if (out.final_update_norm < cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.iterations = std::min(out.iterations, cfg.max_iter);
    out.beta = ParameterVector::from_beta(beta, spec.m_set);
    if (beta.allFinite()) fill_diagnostics(out, data, spec, inverses, pen);
    return out;
}

}  // namespace

FitResult penalized_solve(const Dataset& data, const ModelSpec& spec,
                          const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                          const VectorXd& init) {
    return solve_from(data, spec, inverses, cfg, start_point(data, spec, inverses, cfg, init));
}

FitResult penalized_solve(const Dataset& data, const ModelSpec& spec, const WorkingCovariance& cov,
                          const SolverConfig& cfg, const VectorXd& init) {
    return penalized_solve(data, spec, cov.unit_inverses(data), cfg, init);
}

double lambda_upper_bound(const Dataset& data, const ModelSpec& spec,
                          const std::vector<MatrixXd>& inverses, const SolverConfig& cfg) {
    VectorXd start = VectorXd::Zero(data.p());
    FitResult m_only;
    if (!spec.m_set.empty()) {
        const VectorXd full = default_initial_value(data, spec.link);
        for (int j : spec.m_set) start(j) = full(j);
        SolverConfig c = cfg;
        c.lambda_n = 0.0;
        m_only = penalized_solve(data, spec, inverses, c, start);
        start = m_only.beta.beta;
    }
    const VectorXd u = estimating_function(data, start, spec.link, inverses);
    double top = 0.0;
    for (int j = 0; j < data.p(); ++j) {
        if (!contains(spec.m_set, j)) top = std::max(top, std::abs(u(j)));
    }
    return top;
}

TunedFit fit_tuned(const Dataset& data, const ModelSpec& spec,
                   const std::vector<MatrixXd>& inverses, const SolverConfig& cfg,
                   const TuningConfig& tuning, const VectorXd& init) {
    if (tuning.grid_size < 1 || !(tuning.min_ratio > 0.0 && tuning.min_ratio <= 1.0)) {
        throw InputError("invalid lambda grid settings");
    }
    TunedFit out;
    const double top = lambda_upper_bound(data, spec, inverses, cfg);
    const int g = tuning.grid_size;
    for (int i = 0; i < g; ++i) {
        const double frac = g == 1 ? 0.0 : static_cast<double>(i) / (g - 1);
        out.lambdas.push_back(top * std::pow(tuning.min_ratio, frac));
    }

    const double n = data.n();
    const double nl = n * data.l();
    const double log_factor = std::max(1.0, std::log(std::log(std::max<double>(data.p(), 3.0))));
    double best = std::numeric_limits<double>::infinity();
    const StartPoint start = start_point(data, spec, inverses, cfg, init);
    for (size_t i = 0; i < out.lambdas.size(); ++i) {
        SolverConfig c = cfg;
        c.lambda_n = out.lambdas[i];
        FitResult fit = solve_from(data, spec, inverses, c, start);
        double q = 0.0;
        for (int u = 0; u < data.n(); ++u) {
            const VectorXd r = residual(data[u], fit.beta.beta, spec.link);
            q += r.dot(inverses[static_cast<size_t>(u)] * r);
        }
        const double df = static_cast<double>(fit.beta.support.size());
        const double crit = nl * std::log(std::max(q / nl, 1e-300)) + df * std::log(n) * log_factor;
        out.criterion.push_back(crit);
        if (crit < best && fit.beta.beta.allFinite()) {
            best = crit;
            out.selected = static_cast<int>(i);
            out.fit = std::move(fit);
        }
    }
    if (!std::isfinite(best)) throw NumericalError("no lambda on the grid produced a finite fit");
    return out;
}

}  // namespace pgee

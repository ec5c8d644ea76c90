#include "helpers.hpp"

#include "pgee/errors.hpp"
#include "pgee/estimating.hpp"
#include "pgee/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace pgee;

namespace {

std::vector<MatrixXd> random_inverses(Rng& rng, int n, int l) {
    std::vector<MatrixXd> out;
    for (int i = 0; i < n; ++i) out.push_back(testing::random_spd(rng, l).inverse());
    return out;
}

// Responses on the scale of each link's mean.
Dataset dataset_for_link(Rng& rng, const LinkFunction& link, int n, int p, int l,
                         const VectorXd& beta) {
    std::vector<ObservationBlock> blocks;
    for (int i = 0; i < n; ++i) {
        MatrixXd x = testing::uniform_matrix(rng, p, l);
        ObservationBlock b(VectorXd::Zero(l), x, i + 1);
        VectorXd mu = evaluate_mean(b, beta, link);
        for (int k = 0; k < l; ++k) {
            if (link.kind() == LinkKind::logit) {
                b.y(k) = rng.uniform() < mu(k) ? 1.0 : 0.0;
            } else {
                b.y(k) = mu(k) + 0.5 * rng.normal();
            }
        }
        blocks.push_back(std::move(b));
    }
    return Dataset(std::move(blocks));
}

MatrixXd fd_jacobian(const Dataset& data, const VectorXd& beta, const LinkFunction& link,
                     const std::vector<MatrixXd>& inv) {
    const int p = data.p();
    MatrixXd out(p, p);
    for (int j = 0; j < p; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(beta(j)));
        VectorXd up = beta;
        VectorXd dn = beta;
        up(j) += h;
        dn(j) -= h;
        out.col(j) = (estimating_function(data, up, link, inv) -
                      estimating_function(data, dn, link, inv)) / (2 * h);
    }
    return out;
}

IndexSet all_indices(int p) {
    IndexSet s;
    for (int j = 0; j < p; ++j) s.push_back(j);
    return s;
}

double scad_threshold(double z, double lambda, double a) {
    const double az = std::abs(z);
    const double sg = z > 0 ? 1.0 : -1.0;
    if (az <= 2 * lambda) return sg * std::max(az - lambda, 0.0);
    if (az <= a * lambda) return ((a - 1) * z - sg * a * lambda) / (a - 2);
    return z;
}

}  // namespace

TEST_CASE("estimating function by hand") {
    std::vector<ObservationBlock> one;
    one.emplace_back(VectorXd::Constant(1, 3.0), MatrixXd{{1.0}, {2.0}}, 1);
    const Dataset d(one);
    const VectorXd u = estimating_function(d, VectorXd::Zero(2), LinkFunction::identity(),
                                           WorkingCovariance::identity());
    CHECK(u.isApprox(VectorXd{{3.0, 6.0}}));
}

TEST_CASE("estimating function vanishes at least squares and at exact means") {
    Rng rng(21);
    const Dataset d = testing::linear_dataset(rng, 40, 4, 1, VectorXd{{1.0, 0.0, -1.0, 0.5}}, 1.0);
    const MatrixXd& x = d.stacked_design();
    const VectorXd ols = (x * x.transpose()).ldlt().solve(x * d.stacked_response());
    const VectorXd u = estimating_function(d, ols, LinkFunction::identity(),
                                           WorkingCovariance::identity());
    CHECK(u.cwiseAbs().maxCoeff() <= 1e-12);

    for (auto link : {LinkFunction::identity(), LinkFunction::log(), LinkFunction::logit()}) {
        const VectorXd b0 = 0.5 * testing::normal_vector(rng, 3);
        std::vector<ObservationBlock> blocks;
        for (int i = 0; i < 20; ++i) {
            ObservationBlock b(VectorXd::Zero(2), testing::uniform_matrix(rng, 3, 2), i);
            b.y = evaluate_mean(b, b0, link);
            blocks.push_back(b);
        }
        const auto inv = random_inverses(rng, 20, 2);
        CHECK(estimating_function(Dataset(blocks), b0, link, inv).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("identity jacobian is the negative gram matrix") {
    Rng rng(22);
    const Dataset d = testing::linear_dataset(rng, 25, 5, 1, VectorXd::Ones(5), 1.0);
    const IndexSet cols{1, 3};
    const MatrixXd j = estimating_jacobian(d, VectorXd::Zero(5), LinkFunction::identity(),
                                           WorkingCovariance::identity(), cols);
    MatrixXd expect = MatrixXd::Zero(5, 2);
    for (const auto& b : d.blocks()) {
        for (int c = 0; c < 2; ++c) expect.col(c) -= b.x.col(0) * b.x(cols[static_cast<size_t>(c)], 0);
    }
    expect /= 25.0;
    CHECK((j - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("jacobian agrees with central differences") {
    Rng rng(23);
    for (auto link : {LinkFunction::identity(), LinkFunction::log(), LinkFunction::logit()}) {
        for (int rep = 0; rep < 5; ++rep) {
            const int n = 30;
            const int p = 6;
            const int l = 2;
            const VectorXd b0 = 0.4 * testing::normal_vector(rng, p);
            const Dataset d = dataset_for_link(rng, link, n, p, l, b0);
            const auto inv = random_inverses(rng, n, l);
            const VectorXd beta = b0 + 0.2 * testing::normal_vector(rng, p);
            const MatrixXd analytic = estimating_jacobian(d, beta, link, inv, all_indices(p));
            CHECK(testing::rel_error(analytic, fd_jacobian(d, beta, link, inv)) <= 1e-5);
            const auto sys = estimating_system(d, beta, link, inv, {0, 2, 5});
            CHECK((sys.jac_ss - analytic(IndexSet{0, 2, 5}, IndexSet{0, 2, 5})).cwiseAbs().maxCoeff() <=
                  1e-13);
            CHECK((sys.u - estimating_function(d, beta, link, inv)).cwiseAbs().maxCoeff() <= 1e-14);
        }
    }
}

TEST_CASE("zero residuals leave only the weighted derivative term") {
    Rng rng(24);
    const auto link = LinkFunction::log();
    const VectorXd b0 = 0.3 * testing::normal_vector(rng, 4);
    std::vector<ObservationBlock> blocks;
    for (int i = 0; i < 15; ++i) {
        ObservationBlock b(VectorXd::Zero(2), testing::uniform_matrix(rng, 4, 2), i);
        b.y = evaluate_mean(b, b0, link);
        blocks.push_back(b);
    }
    const Dataset d(blocks);
    const auto inv = random_inverses(rng, 15, 2);
    MatrixXd expect = MatrixXd::Zero(4, 4);
    for (int i = 0; i < 15; ++i) {
        const MatrixXd dm = mean_derivative_matrix(d[i], b0, link);
        expect -= d[i].x * dm * inv[static_cast<size_t>(i)] * dm * d[i].x.transpose();
    }
    expect /= 15.0;
    CHECK(testing::rel_error(estimating_jacobian(d, b0, link, inv, all_indices(4)), expect) <= 1e-13);
}

TEST_CASE("working covariance kinds") {
    CHECK_THROWS_AS(WorkingCovariance::fixed(MatrixXd{{1.0, 2.0}, {2.0, 1.0}}), InputError);
    Rng rng(25);
    const Dataset d = testing::linear_dataset(rng, 10, 3, 2, VectorXd::Ones(3), 1.0);
    const MatrixXd s = testing::random_spd(rng, 2);
    const auto inv = WorkingCovariance::fixed(s).unit_inverses(d);
    CHECK((inv[0] * s - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero penalty solve is least squares") {
    Rng rng(26);
    const int p = 5;
    const Dataset d = testing::linear_dataset(rng, 60, p, 1, testing::normal_vector(rng, p), 1.0);
    ModelSpec spec;
    spec.m_set = all_indices(p);
    SolverConfig cfg;
    cfg.lambda_n = 0.0;
    const auto fit = penalized_solve(d, spec, WorkingCovariance::identity(), cfg, VectorXd::Zero(p));
    const MatrixXd& x = d.stacked_design();
    const VectorXd ols = (x * x.transpose()).ldlt().solve(x * d.stacked_response());
    CHECK(fit.converged);
    CHECK((fit.beta.beta - ols).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("dominating penalty zeroes pure noise") {
    Rng rng(27);
    const int p = 8;
    const int n = 50;
    const Dataset d = testing::linear_dataset(rng, n, p, 2, VectorXd::Zero(p), 1.0);
    ModelSpec spec;
    const VectorXd u0 = estimating_function(d, VectorXd::Zero(p), LinkFunction::identity(),
                                            WorkingCovariance::identity());
    SolverConfig cfg;
    cfg.lambda_n = 10.0 * u0.cwiseAbs().maxCoeff() * std::log(n);
    const VectorXd init = default_initial_value(d, LinkFunction::identity());
    const auto fit = penalized_solve(d, spec, WorkingCovariance::identity(), cfg, init);
    CHECK(fit.beta.beta.isZero(0.0));
    CHECK(fit.converged);
}

TEST_CASE("orthonormal design reproduces SCAD thresholding") {
    Rng rng(28);
    const int n = 40;
    const int p = 6;
    const Eigen::HouseholderQR<MatrixXd> qr(testing::uniform_matrix(rng, n, p));
    const MatrixXd q = MatrixXd(qr.householderQ()).leftCols(p) * std::sqrt(double(n));
    const VectorXd z{{0.1, 0.7, 1.5, 3.0, -0.9, -1.7}};
    std::vector<ObservationBlock> blocks;
    for (int i = 0; i < n; ++i) {
        const VectorXd xi = q.row(i).transpose();
        blocks.emplace_back(VectorXd::Constant(1, xi.dot(z)), MatrixXd(xi), i + 1);
    }
    const Dataset d(blocks);
    ModelSpec spec;
    SolverConfig cfg;
    cfg.lambda_n = 0.5;
    cfg.tol = 1e-12;
    const auto fit = penalized_solve(d, spec, WorkingCovariance::identity(), cfg,
                                     default_initial_value(d, LinkFunction::identity()));
    CHECK(fit.converged);
    for (int j = 0; j < p; ++j) {
        CHECK(fit.beta.beta(j) == doctest::Approx(scad_threshold(z(j), 0.5, 3.7)).epsilon(1e-8));
    }
}

TEST_CASE("solution properties on a sparse problem") {
    Rng rng(29);
    const int p = 12;
    VectorXd b0 = VectorXd::Zero(p);
    b0(0) = 0.3;
    b0(4) = 1.0;
    b0(7) = -1.0;
    const Dataset d = testing::linear_dataset(rng, 150, p, 2, b0, 1.0);
    ModelSpec spec;
    spec.m_set = {0, 1};
    SolverConfig cfg;
    cfg.lambda_n = 0.15;
    const auto inv = WorkingCovariance::identity().unit_inverses(d);
    const VectorXd init = default_initial_value(d, spec.link);
    const auto fit = penalized_solve(d, spec, inv, cfg, init);
    REQUIRE(fit.converged);
    const VectorXd u = estimating_function(d, fit.beta.beta, spec.link, inv);
    for (int j : spec.m_set) CHECK(std::abs(u(j)) <= 10 * cfg.tol);
    for (int j = 0; j < p; ++j) {
        const double b = fit.beta.beta(j);
        if (!contains(spec.m_set, j)) {
            CHECK((b == 0.0 || std::abs(b) >= cfg.zero_threshold));
            if (b == 0.0) CHECK(std::abs(u(j)) <= cfg.lambda_n + 1e-10);
        }
        if (b != 0.0 && !contains(spec.m_set, j)) {
            const double pen = (b > 0 ? 1.0 : -1.0) *
                               penalty_derivative(b, PenaltyConfig{spec.penalty.kind, cfg.lambda_n,
                                                                   spec.penalty.a});
            CHECK(std::abs(u(j) - pen) <= 10 * cfg.tol);
        }
    }
    CHECK(fit.equation_norm_on_support <= 10 * cfg.tol);
    CHECK(fit.off_support_equation_norm <= cfg.lambda_n);

    std::vector<int> order(150);
    for (int i = 0; i < 150; ++i) order[static_cast<size_t>(i)] = 149 - i;
    const Dataset shuffled = d.subset(order);
    const auto fit2 = penalized_solve(shuffled, spec, WorkingCovariance::identity(), cfg, init);
    CHECK((fit2.beta.beta - fit.beta.beta).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("tuned fit selects the minimum criterion") {
    Rng rng(30);
    VectorXd b0 = VectorXd::Zero(10);
    b0(2) = 1.0;
    b0(5) = -1.0;
    const Dataset d = testing::linear_dataset(rng, 200, 10, 2, b0, 1.0);
    ModelSpec spec;
    spec.m_set = {0};
    const auto inv = WorkingCovariance::identity().unit_inverses(d);
    const auto tuned = fit_tuned(d, spec, inv, SolverConfig{}, TuningConfig{},
                                 default_initial_value(d, spec.link));
    CHECK(tuned.lambdas.size() == 20);
    CHECK(tuned.criterion[static_cast<size_t>(tuned.selected)] ==
          *std::min_element(tuned.criterion.begin(), tuned.criterion.end()));
    CHECK(tuned.fit.beta.support == IndexSet{0, 2, 5});
    const double top = lambda_upper_bound(d, spec, inv, SolverConfig{});
    CHECK(tuned.lambdas.front() == doctest::Approx(top));
    SolverConfig at_top;
    at_top.lambda_n = top * 1.0001;
    const auto zero = penalized_solve(d, spec, inv, at_top, default_initial_value(d, spec.link));
    CHECK(zero.beta.support == IndexSet{0});
}

TEST_CASE("solver input validation") {
    Rng rng(31);
    const Dataset d = testing::linear_dataset(rng, 10, 3, 1, VectorXd::Ones(3), 1.0);
    ModelSpec spec;
    CHECK_THROWS_AS(penalized_solve(d, spec, WorkingCovariance::identity(), SolverConfig{},
                                    VectorXd::Zero(2)),
                    InputError);
    SolverConfig bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(penalized_solve(d, spec, WorkingCovariance::identity(), bad, VectorXd::Zero(3)),
                    InputError);
}

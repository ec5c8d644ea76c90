#include "helpers.hpp"

#include "pgee/lasso.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace pgee;

namespace {

double objective(const MatrixXd& x, const VectorXd& y, const VectorXd& b, double lambda) {
    return (y - x * b).squaredNorm() / static_cast<double>(x.rows()) + lambda * b.lpNorm<1>();
}

double kkt_violation(const MatrixXd& x, const VectorXd& y, const VectorXd& b, double lambda) {
    const VectorXd grad = 2.0 * x.transpose() * (y - x * b) / static_cast<double>(x.rows());
    double worst = 0.0;
    for (int j = 0; j < b.size(); ++j) {
        if (b(j) != 0.0) {
            worst = std::max(worst, std::abs(grad(j) - lambda * (b(j) > 0 ? 1.0 : -1.0)));
        } else {
            worst = std::max(worst, std::abs(grad(j)) - lambda);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("zero penalty gives least squares") {
    Rng rng(8);
    const int d = 6;
    const MatrixXd x = testing::uniform_matrix(rng, d, d);
    const VectorXd y = testing::normal_vector(rng, d);
    const auto sol = solve_lasso({x, y, 0.0, 1e-12, 100000});
    const VectorXd ols = x.colPivHouseholderQr().solve(y);
    CHECK(sol.converged);
    CHECK((sol.coef - ols).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("large penalty gives zero") {
    Rng rng(9);
    const MatrixXd x = testing::uniform_matrix(rng, 30, 5);
    const VectorXd y = testing::normal_vector(rng, 30);
    const double lmax = (2.0 * x.transpose() * y / 30.0).cwiseAbs().maxCoeff();
    CHECK(solve_lasso({x, y, lmax, 1e-10, 1000}).coef.isZero(0.0));
    CHECK(GramLasso(x, y).lambda_max() == doctest::Approx(lmax).epsilon(1e-12));
    CHECK_FALSE(solve_lasso({x, y, 0.9 * lmax, 1e-10, 1000}).coef.isZero(0.0));
}

TEST_CASE("single standardized predictor is soft thresholded") {
    Rng rng(10);
    const int n = 50;
    VectorXd x = testing::normal_vector(rng, n);
    x *= std::sqrt(n / x.squaredNorm());
    const VectorXd y = 0.8 * x + testing::normal_vector(rng, n);
    const double c = x.dot(y) / n;
    for (double lambda : {0.0, 0.3, 0.9, 2.0 * std::abs(c) + 0.1}) {
        const double expect = (c > 0 ? 1.0 : -1.0) * std::max(std::abs(c) - lambda / 2.0, 0.0);
        const auto sol = solve_lasso({x, y, lambda, 1e-12, 1000});
        CHECK(sol.coef(0) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("random instances: KKT, local optimality and sweep monotonicity") {
    Rng rng(11);
    for (int rep = 0; rep < 25; ++rep) {
        const int d = 1 + static_cast<int>(rng.below(8));
        const int n = 1 + static_cast<int>(rng.below(20));
        const MatrixXd x = testing::uniform_matrix(rng, n, d);
        const VectorXd y = testing::normal_vector(rng, n);
        const double lambda = rng.uniform(0.01, 0.5);
        const auto sol = solve_lasso({x, y, lambda, 1e-9, 100000});
        CHECK(sol.converged);
        CHECK(kkt_violation(x, y, sol.coef, lambda) <= 1e-6);
        CHECK(sol.objective == doctest::Approx(objective(x, y, sol.coef, lambda)).epsilon(1e-10));
        const double best = objective(x, y, sol.coef, lambda);
        for (int j = 0; j < d; ++j) {
            for (double step : {-0.01, 0.01}) {
                VectorXd moved = sol.coef;
                moved(j) += step;
                CHECK(objective(x, y, moved, lambda) >= best - 1e-12);
            }
        }
        for (size_t s = 1; s < sol.objective_trace.size(); ++s) {
            CHECK(sol.objective_trace[s] <= sol.objective_trace[s - 1] + 1e-14);
        }
    }
}

TEST_CASE("column permutation permutes coefficients") {
    Rng rng(12);
    const MatrixXd x = testing::uniform_matrix(rng, 40, 6);
    const VectorXd y = x.col(1) - 0.5 * x.col(4) + 0.3 * testing::normal_vector(rng, 40);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    MatrixXd xp(40, 6);
    for (int j = 0; j < 6; ++j) xp.col(j) = x.col(perm[static_cast<size_t>(j)]);
    const auto a = solve_lasso({x, y, 0.05, 1e-12, 100000});
    const auto b = solve_lasso({xp, y, 0.05, 1e-12, 100000});
    for (int j = 0; j < 6; ++j) {
        CHECK(b.coef(j) == doctest::Approx(a.coef(perm[static_cast<size_t>(j)])).epsilon(1e-8));
    }
}

TEST_CASE("BIC path") {
    Rng rng(13);
    const MatrixXd x = testing::uniform_matrix(rng, 200, 10);
    const VectorXd y = 2.0 * x.col(0) + 0.5 * testing::normal_vector(rng, 200);
    const auto fit = fit_lasso_bic(GramLasso(x, y), 30, 1e-3);
    CHECK(fit.lambdas.size() == 30);
    CHECK(fit.lambdas.front() == doctest::Approx(GramLasso(x, y).lambda_max()));
    CHECK(fit.lambdas.back() == doctest::Approx(fit.lambdas.front() * 1e-3));
    CHECK(fit.bic[static_cast<size_t>(fit.selected)] ==
          *std::min_element(fit.bic.begin(), fit.bic.end()));
    CHECK(fit.solution.coef(0) > 1.5);
    const auto grid = lambda_grid(2.0, 3, 0.25);
    CHECK(grid[1] == doctest::Approx(1.0));
}

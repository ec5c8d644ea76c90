#include "helpers.hpp"

#include "pgee/errors.hpp"
#include "pgee/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace pgee;

namespace {

ObservationBlock block_with_predictors(const VectorXd& eta, const VectorXd& y) {
    // p = 1, beta = 1: X_ik' beta = eta_k.
    return ObservationBlock(y, eta.transpose(), 1);
}

}  // namespace

TEST_CASE("mean values at fixed predictors") {
    const VectorXd beta = VectorXd::Ones(1);
    const auto id = block_with_predictors(VectorXd{{1.0, -2.0}}, VectorXd::Zero(2));
    CHECK(evaluate_mean(id, beta, LinkFunction::identity()).isApprox(VectorXd{{1.0, -2.0}}));

    const auto lg = block_with_predictors(VectorXd::Zero(2), VectorXd::Zero(2));
    const VectorXd mu = evaluate_mean(lg, beta, LinkFunction::logit());
    CHECK(mu(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mu(1) == doctest::Approx(0.5).epsilon(1e-15));

    const auto lo = block_with_predictors(VectorXd::Zero(1), VectorXd::Zero(1));
    CHECK(evaluate_mean(lo, beta, LinkFunction::log())(0) == doctest::Approx(1.0));
}

TEST_CASE("residuals") {
    const VectorXd beta = VectorXd::Ones(1);
    const auto b = block_with_predictors(VectorXd{{1.0, 1.0}}, VectorXd{{1.0, 2.0}});
    CHECK(residual(b, beta, LinkFunction::identity()).isApprox(VectorXd{{0.0, 1.0}}));

    const auto lo = block_with_predictors(VectorXd::Zero(1), VectorXd::Ones(1));
    CHECK(residual(lo, beta, LinkFunction::log())(0) == doctest::Approx(0.0));

    Rng rng(3);
    for (auto link : {LinkFunction::identity(), LinkFunction::log(), LinkFunction::logit()}) {
        const MatrixXd x = testing::uniform_matrix(rng, 4, 3);
        const VectorXd bt = testing::normal_vector(rng, 4);
        ObservationBlock exact(VectorXd::Zero(3), x, 1);
        exact.y = evaluate_mean(exact, bt, link);
        CHECK(residual(exact, bt, link).cwiseAbs().maxCoeff() == 0.0);

        ObservationBlock noisy(testing::normal_vector(rng, 3), x, 2);
        const VectorXd back = residual(noisy, bt, link) + evaluate_mean(noisy, bt, link);
        CHECK((back - noisy.y).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("mean derivative matrices") {
    const VectorXd beta = VectorXd::Ones(1);
    const auto b = block_with_predictors(VectorXd{{0.3, -0.7}}, VectorXd::Zero(2));
    CHECK(MatrixXd(mean_derivative_matrix(b, beta, LinkFunction::identity()))
              .isApprox(MatrixXd::Identity(2, 2)));

    const auto z = block_with_predictors(VectorXd::Zero(3), VectorXd::Zero(3));
    CHECK(MatrixXd(mean_derivative_matrix(z, beta, LinkFunction::logit()))
              .isApprox(0.25 * MatrixXd::Identity(3, 3)));

    const auto lo = block_with_predictors(VectorXd{{std::log(2.0), 0.0}}, VectorXd::Zero(2));
    const MatrixXd d = mean_derivative_matrix(lo, beta, LinkFunction::log());
    CHECK(d(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(d(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d(0, 1) == 0.0);

    Rng rng(5);
    for (auto link : {LinkFunction::log(), LinkFunction::logit()}) {
        const ObservationBlock r(VectorXd::Zero(3), testing::uniform_matrix(rng, 4, 3), 1);
        const auto dm = mean_derivative_matrix(r, testing::normal_vector(rng, 4), link);
        CHECK(dm.diagonal().minCoeff() > 0.0);
    }
}

TEST_CASE("link derivatives agree with finite differences") {
    for (auto link : {LinkFunction::identity(), LinkFunction::log(), LinkFunction::logit()}) {
        for (int g = 0; g < 100; ++g) {
            const double t = -5.0 + 10.0 * g / 99.0;
            const double h = 1e-5;
            const double d1 = (link.value(t + h) - link.value(t - h)) / (2 * h);
            const double d2 = (link.first(t + h) - link.first(t - h)) / (2 * h);
            const double d3 = (link.second(t + h) - link.second(t - h)) / (2 * h);
            const auto close = [](double fd, double exact) {
                return std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact));
            };
            CHECK(close(d1, link.first(t)));
            CHECK(close(d2, link.second(t)));
            CHECK(close(d3, link.third(t)));
            CHECK(std::isfinite(link.third(t)));
        }
    }
}

TEST_CASE("custom links and names") {
    const auto cube = LinkFunction::custom(
        "cube", [](double t) { return t * t * t; }, [](double t) { return 3 * t * t; },
        [](double t) { return 6 * t; }, [](double) { return 6.0; });
    CHECK(cube.kind() == LinkKind::custom);
    CHECK(cube.eval(2.0).g == 8.0);
    CHECK(cube.eval(2.0).d2 == 12.0);
    CHECK(LinkFunction::from_name("logit").kind() == LinkKind::logit);
    CHECK_THROWS_AS(LinkFunction::from_name("probit"), InputError);
}

TEST_CASE("dataset validation") {
    std::vector<ObservationBlock> good;
    good.emplace_back(VectorXd::Zero(2), MatrixXd::Zero(3, 2), 1);
    good.emplace_back(VectorXd::Zero(2), MatrixXd::Zero(3, 2), 2);
    const Dataset d(good);
    CHECK(d.n() == 2);
    CHECK(d.p() == 3);
    CHECK(d.l() == 2);
    CHECK(d.stacked_design().cols() == 4);

    auto mixed = good;
    mixed.emplace_back(VectorXd::Zero(1), MatrixXd::Zero(3, 1), 3);
    CHECK_THROWS_AS(Dataset{mixed}, InputError);

    CHECK_THROWS_AS(ObservationBlock(VectorXd::Zero(2), MatrixXd::Zero(3, 3), 1), InputError);
    MatrixXd bad = MatrixXd::Zero(3, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(ObservationBlock(VectorXd::Zero(2), bad, 1), InputError);

    const VectorXd wrong = VectorXd::Zero(4);
    CHECK_THROWS_AS(evaluate_mean(good[0], wrong, LinkFunction::identity()), InputError);
}

TEST_CASE("design bound produces warnings only") {
    std::vector<ObservationBlock> blocks;
    MatrixXd big = MatrixXd::Zero(2, 1);
    big(0, 0) = 1e7;
    blocks.emplace_back(VectorXd::Zero(1), big, 1);
    blocks.emplace_back(VectorXd::Zero(1), MatrixXd::Zero(2, 1), 2);
    const Dataset d(blocks);
    CHECK(d.check_design_bound().size() == 1);
    CHECK(d.check_design_bound(1e8).empty());
}

TEST_CASE("subset preserves unit ids and index helpers") {
    Rng rng(1);
    const Dataset d = testing::linear_dataset(rng, 6, 3, 2, VectorXd::Ones(3), 1.0);
    const Dataset s = d.subset({1, 4});
    CHECK(s.n() == 2);
    CHECK(s[0].unit_id == 2);
    CHECK(s[1].unit_id == 5);
    CHECK(make_index_set({3, 1, 1}, 5) == IndexSet{1, 3});
    CHECK_THROWS_AS(make_index_set({5}, 5), InputError);
    CHECK(set_union({0, 2}, {1, 2}) == IndexSet{0, 1, 2});
    CHECK(complement({0, 2}, 4) == IndexSet{1, 3});
    const auto pv = ParameterVector::from_beta(VectorXd{{0.0, 1.0, 0.0}}, {0});
    CHECK(pv.support == IndexSet{1});
    CHECK(pv.m_set == IndexSet{0});
}

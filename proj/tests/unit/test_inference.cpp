#include "helpers.hpp"

#include "pgee/distributions.hpp"
#include "pgee/errors.hpp"
#include "pgee/estimating.hpp"
#include "pgee/inference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <doctest.h>

#include <cmath>

using namespace pgee;

namespace {

MatrixXd random_psd(Rng& rng, int dim, int rank) {
    const MatrixXd a = testing::uniform_matrix(rng, dim, rank);
    return a * a.transpose();
}

}  // namespace

TEST_CASE("chi-squared distribution against an independent implementation") {
    for (double df : {1.0, 2.0, 3.0, 7.0, 20.0}) {
        const boost::math::chi_squared_distribution<double> ref(df);
        for (double x : {0.01, 0.5, 1.0, 3.84146, 10.0, 40.0, 120.0}) {
            CHECK(std::abs(chi2_cdf(x, df) - boost::math::cdf(ref, x)) <= 1e-10);
            CHECK(std::abs(chi2_sf(x, df) - boost::math::cdf(boost::math::complement(ref, x))) <=
                  1e-10);
        }
        for (double q : {0.01, 0.5, 0.95, 0.999}) {
            CHECK(chi2_quantile(q, df) == doctest::Approx(boost::math::quantile(ref, q)).epsilon(1e-9));
        }
        for (double delta : {0.1, 1.0, 5.0, 30.0, 200.0}) {
            const boost::math::non_central_chi_squared_distribution<double> nref(df, delta);
            for (double x : {0.5, 3.0, 10.0, 50.0, 250.0}) {
                CHECK(std::abs(chi2_cdf(x, df, delta) - boost::math::cdf(nref, x)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("chi-squared spot values") {
    CHECK(chi2_cdf(3.84146, 1.0) == doctest::Approx(0.95).epsilon(1e-5));
    CHECK(std::abs(chi2_cdf(2.5, 3.0) - chi2_cdf(2.5, 3.0, 1e-300)) <= 1e-15);
    CHECK(chi2_cdf(0.0, 2.0) == 0.0);
    CHECK(chi2_sf(0.0, 2.0, 3.0) == 1.0);
    CHECK(regularized_gamma_p(1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("noncentral mean by simulation") {
    Rng rng(61);
    const int draws = 200000;
    const double mu = std::sqrt(3.0);
    double total = 0.0;
    for (int d = 0; d < draws; ++d) {
        const double z1 = rng.normal() + mu;
        const double z2 = rng.normal();
        total += z1 * z1 + z2 * z2;
    }
    CHECK(std::abs(total / draws - 5.0) <= 0.1);
}

TEST_CASE("sandwich collapses with true weights and conditional covariance") {
    Rng rng(62);
    const int n = 200;
    const Dataset d = testing::linear_dataset(rng, n, 4, 3, VectorXd::Ones(4), 1.0);
    std::vector<MatrixXd> sigmas, inverses;
    for (int i = 0; i < n; ++i) {
        sigmas.push_back(testing::random_spd(rng, 3));
        inverses.push_back(sigmas.back().inverse());
    }
    for (auto link : {LinkFunction::identity(), LinkFunction::log()}) {
        const auto s = sandwich(d, 0.2 * VectorXd::Ones(4), link, inverses, {0, 1, 2, 3}, &sigmas);
        CHECK(testing::rel_error(s.v2, s.v1) <= 1e-12);
        CHECK(testing::rel_error(s.omega, s.v1.inverse()) <= 1e-10);
        CHECK((s.omega - s.omega.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("sandwich matches the least-squares covariance") {
    Rng rng(63);
    const int n = 20000;
    const Dataset d = testing::linear_dataset(rng, n, 3, 1, VectorXd{{1.0, -1.0, 0.5}}, 1.0);
    const MatrixXd& x = d.stacked_design();
    const VectorXd ols = (x * x.transpose()).ldlt().solve(x * d.stacked_response());
    const auto inv = WorkingCovariance::identity().unit_inverses(d);
    const auto s = sandwich(d, ols, LinkFunction::identity(), inv, {0, 1, 2});
    const MatrixXd expect = (x * x.transpose() / n).inverse();
    CHECK(testing::rel_error(s.omega, expect) <= 0.1);
    CHECK((s.omega - s.omega.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(restrict_to(s.omega, {0, 1, 2}, {1})(0, 0) == s.omega(1, 1));
}

TEST_CASE("singular V1 is reported") {
    Rng rng(64);
    const Dataset d = testing::linear_dataset(rng, 2, 6, 1, VectorXd::Zero(6), 1.0);
    const auto inv = WorkingCovariance::identity().unit_inverses(d);
    CHECK_THROWS_AS(sandwich(d, VectorXd::Zero(6), LinkFunction::identity(), inv, {0, 1, 2, 3, 4, 5}),
                    NumericalError);
}

TEST_CASE("wald statistic") {
    HypothesisSpec one{MatrixXd::Identity(1, 1), VectorXd::Zero(1), {0}};
    const auto w = wald(VectorXd::Constant(1, 0.1), one, MatrixXd::Identity(1, 1), 100);
    CHECK(w.statistic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.df == 1);
    CHECK(w.p_value == doctest::Approx(chi2_sf(1.0, 1.0)));

    HypothesisSpec two{MatrixXd{{1.0, 1.0}, {0.0, 1.0}}, VectorXd{{0.5, 0.2}}, {0, 1}};
    const VectorXd at_t = two.C.fullPivLu().solve(two.t);
    const auto zero = wald(at_t, two, MatrixXd::Identity(2, 2), 50);
    CHECK(zero.statistic == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zero.p_value == doctest::Approx(1.0));

    Rng rng(65);
    for (int rep = 0; rep < 20; ++rep) {
        const MatrixXd omega = testing::random_spd(rng, 3);
        HypothesisSpec h{testing::uniform_matrix(rng, 2, 3), testing::normal_vector(rng, 2), {0, 1, 2}};
        const MatrixXd m = testing::random_spd(rng, 2);
        HypothesisSpec hm{m * h.C, m * h.t, h.m_set};
        const VectorXd b = testing::normal_vector(rng, 3);
        const double w1 = wald(b, h, omega, 80).statistic;
        CHECK(std::abs(wald(b, hm, omega, 80).statistic - w1) <= 1e-10 * std::max(1.0, w1));
    }

    HypothesisSpec bad{MatrixXd{{1.0, 1.0}, {2.0, 2.0}}, VectorXd::Zero(2), {0, 1}};
    CHECK_THROWS_AS(bad.validate(), InputError);
    CHECK_THROWS_AS(wald(VectorXd::Zero(1), one, MatrixXd::Zero(1, 1), 10), NumericalError);
}

TEST_CASE("noncentrality") {
    Rng rng(66);
    const MatrixXd omega = testing::random_spd(rng, 3);
    const MatrixXd c = testing::uniform_matrix(rng, 2, 3);
    const VectorXd h = testing::normal_vector(rng, 2);
    CHECK(noncentrality(VectorXd::Zero(2), c, omega) == 0.0);
    CHECK(noncentrality(2 * h, c, omega) == doctest::Approx(4 * noncentrality(h, c, omega)));
    CHECK(noncentrality(VectorXd::Constant(1, 1.5), MatrixXd::Identity(1, 1),
                        MatrixXd::Constant(1, 1, 0.5)) == doctest::Approx(4.5));
}

TEST_CASE("power comparison") {
    Rng rng(67);
    const MatrixXd omega = testing::random_spd(rng, 2);
    const MatrixXd c = MatrixXd::Identity(2, 2);
    const VectorXd h{{1.0, -0.5}};
    const auto same = power_compare(omega, omega, c, h, 0.05);
    CHECK(same.power_crossfit == same.power_initial);
    CHECK(same.dominance);

    const auto doubled = power_compare(omega, 2 * omega, c, h, 0.05);
    CHECK(doubled.delta_crossfit == doctest::Approx(2 * doubled.delta_initial));
    CHECK(doubled.power_crossfit > doubled.power_initial);

    const auto null = power_compare(omega, 2 * omega, c, VectorXd::Zero(2), 0.05);
    CHECK(null.power_crossfit == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(null.power_initial == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("loewner order implies larger noncentrality") {
    Rng rng(68);
    int checked = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const int m = 1 + static_cast<int>(rng.below(4));
        const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
        const MatrixXd hat = testing::random_spd(rng, m);
        const MatrixXd tilde = hat + random_psd(rng, m, 1 + static_cast<int>(rng.below(3)));
        MatrixXd c = testing::uniform_matrix(rng, r, m);
        if (Eigen::FullPivLU<MatrixXd>(c).rank() < r) continue;
        const VectorXd h = testing::normal_vector(rng, r);
        const auto pc = power_compare(hat, tilde, c, h, 0.05);
        CHECK(pc.delta_crossfit >= pc.delta_initial - 1e-12 * std::max(1.0, pc.delta_initial));
        CHECK(pc.dominance);
        ++checked;
    }
    CHECK(checked > 400);
}

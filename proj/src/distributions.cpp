#include "pgee/distributions.hpp"

#include "pgee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pgee {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 100000;

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxTerms; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxTerms; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_args(double a, double x) {
    if (!(a > 0.0)) throw InputError("incomplete gamma needs a > 0");
    if (std::isnan(x)) throw InputError("incomplete gamma argument is NaN");
}

double poisson_log_pmf(int j, double mean) {
    return -mean + j * std::log(mean) - std::lgamma(j + 1.0);
}

// sum_j Pois(j; nc/2) f(df + 2j), summed outward from the mode.
template <class F>
double poisson_mixture(double df, double noncentrality, F&& f) {
    const double mean = 0.5 * noncentrality;
    const int mode = static_cast<int>(std::floor(mean));
    double sum = 0.0;
    for (int j = mode; j >= 0; --j) {
        const double term = std::exp(poisson_log_pmf(j, mean)) * f(df + 2.0 * j);
        sum += term;
        if (j < mode && term < 1e-14 * sum) break;
    }
    for (int j = mode + 1; j < mode + kMaxTerms; ++j) {
        const double w = std::exp(poisson_log_pmf(j, mean));
        const double term = w * f(df + 2.0 * j);
        sum += term;
        // The weights decay past the mode; stop once they are negligible too.
        if (term < 1e-14 * sum && w < 1e-14) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    check_args(a, x);
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return std::clamp(gamma_p_series(a, x), 0.0, 1.0);
    return std::clamp(1.0 - gamma_q_fraction(a, x), 0.0, 1.0);
}

double regularized_gamma_q(double a, double x) {
    check_args(a, x);
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
    return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chi2_cdf(double x, double df, double noncentrality) {
    if (!(df > 0.0)) throw InputError("chi-squared needs df > 0");
    if (!(noncentrality >= 0.0)) throw InputError("noncentrality must be nonnegative");
    if (x <= 0.0) return 0.0;
    if (noncentrality == 0.0) return regularized_gamma_p(0.5 * df, 0.5 * x);
    return poisson_mixture(df, noncentrality,
                           [x](double d) { return regularized_gamma_p(0.5 * d, 0.5 * x); });
}

double chi2_sf(double x, double df, double noncentrality) {
    if (!(df > 0.0)) throw InputError("chi-squared needs df > 0");
    if (!(noncentrality >= 0.0)) throw InputError("noncentrality must be nonnegative");
    if (x <= 0.0) return 1.0;
    if (noncentrality == 0.0) return regularized_gamma_q(0.5 * df, 0.5 * x);
    return poisson_mixture(df, noncentrality,
                           [x](double d) { return regularized_gamma_q(0.5 * d, 0.5 * x); });
}

double chi2_upper_quantile(double tail, double df) {
    if (!(df > 0.0)) throw InputError("chi-squared needs df > 0");
    if (std::isnan(tail)) throw InputError("tail probability is NaN");
    if (tail >= 1.0) return 0.0;
    if (tail <= 0.0) return std::numeric_limits<double>::infinity();
    double lo = 0.0;
    double hi = std::max(1.0, df);
    while (chi2_sf(hi, df) > tail) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_sf(mid, df) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double chi2_quantile(double prob, double df) {
    if (prob <= 0.0) return 0.0;
    if (prob >= 1.0) return std::numeric_limits<double>::infinity();
    // Invert on whichever side avoids cancellation.
    if (prob > 0.5) return chi2_upper_quantile(1.0 - prob, df);
    if (!(df > 0.0)) throw InputError("chi-squared needs df > 0");
    double lo = 0.0;
    double hi = std::max(1.0, df);
    while (chi2_cdf(hi, df) < prob) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, df) < prob) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace pgee

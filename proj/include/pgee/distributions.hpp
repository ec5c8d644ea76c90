#pragma once

namespace pgee {

// Regularized lower and upper incomplete gamma functions P(a, x), Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// CDF of the (noncentral) chi-squared law with `df` degrees of freedom.
///
/// The noncentral case sums the Poisson(noncentrality / 2) mixture of
/// central CDFs outward from the Poisson mode, stopping once a term falls
/// below 1e-14 of the running sum.
double chi2_cdf(double x, double df, double noncentrality = 0.0);
// 1 - chi2_cdf, computed without cancellation.
double chi2_sf(double x, double df, double noncentrality = 0.0);

// x with chi2_sf(x, df) = tail; 0 when tail >= 1.
double chi2_upper_quantile(double tail, double df);
double chi2_quantile(double prob, double df);

}  // namespace pgee

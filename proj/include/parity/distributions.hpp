#pragma once

namespace parity {

enum class DistKind { StudentT, F, StudentizedRange };

/// Parameters per kind:
///   StudentT          a = degrees of freedom
///   F                 a = numerator df, b = denominator df
///   StudentizedRange  a = number of groups k (>= 2), b = df (>= 1, may be +inf)
struct DistParams {
  double a = 1.0;
  double b = 1.0;
};

/// CDF in [0,1]. Throws Error(Domain) on invalid parameters.
double dist_cdf(DistKind kind, DistParams params, double x);
/// Upper tail 1 - cdf, computed without cancellation where the backend allows.
double dist_sf(DistKind kind, DistParams params, double x);

double student_t_cdf(double x, double df);
/// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);

/// Absolute accuracy target for the studentized range integrals.
inline constexpr double kStudentizedRangeTolerance = 1e-6;

/// P(Q <= q) for the range of k standard normals divided by an independent
/// sqrt(chi2_df / df). Evaluated as the nested integral
///   int_0^inf f_s(s; df) * W(q s; k) ds,
///   W(w; k) = k int phi(z) [Phi(z + w) - Phi(z)]^(k-1) dz,
/// with adaptive Gauss-Kronrod quadrature on both levels.
double studentized_range_cdf(double q, double k, double df);
double studentized_range_sf(double q, double k, double df);
/// Inverse of studentized_range_cdf by bracketing and bisection.
double studentized_range_quantile(double p, double k, double df);

}  // namespace parity

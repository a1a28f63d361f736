#include "parity/distributions.hpp"

#include "parity/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace parity {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::Domain, what);
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

// Phi(b) - Phi(a) for a <= b, evaluated on whichever tail keeps precision.
double normal_mass(double a, double b) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  if (a >= 0.0) return 0.5 * (std::erfc(a * inv_sqrt2) - std::erfc(b * inv_sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * inv_sqrt2) - std::erfc(-a * inv_sqrt2));
  return 1.0 - 0.5 * std::erfc(-a * inv_sqrt2) - 0.5 * std::erfc(b * inv_sqrt2);
}

// CDF of the range of k iid standard normals.
double normal_range_cdf(double w, double k) {
  if (w <= 0.0) return 0.0;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  auto integrand = [w, k](double z) {
    const double mass = normal_mass(z, z + w);
    if (mass <= 0.0) return 0.0;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z) * std::pow(mass, k - 1.0);
  };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  // phi(z) < 1e-17 outside [-9, 9]; split at the kink-free interior points so
  // each piece is smooth and short.
  constexpr double edges[] = {-9.0, -4.0, -1.5, 0.0, 1.5, 4.0, 9.0};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < std::size(edges); ++i) {
    total += Quad::integrate(integrand, edges[i], edges[i + 1], 12, 1e-11);
  }
  return clamp01(k * total);
}

}  // namespace

double student_t_cdf(double x, double df) {
  require(df > 0.0, "student_t: df must be > 0");
  require(!std::isnan(x), "student_t: x is NaN");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  boost::math::students_t_distribution<double> dist(df);
  return clamp01(boost::math::cdf(dist, x));
}

double student_t_two_sided_p(double t, double df) {
  require(df > 0.0, "student_t: df must be > 0");
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t_distribution<double> dist(df);
  return clamp01(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

double f_cdf(double x, double df1, double df2) {
  require(df1 > 0.0 && df2 > 0.0, "f: degrees of freedom must be > 0");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  boost::math::fisher_f_distribution<double> dist(df1, df2);
  return clamp01(boost::math::cdf(dist, x));
}

double f_sf(double x, double df1, double df2) {
  require(df1 > 0.0 && df2 > 0.0, "f: degrees of freedom must be > 0");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  boost::math::fisher_f_distribution<double> dist(df1, df2);
  return clamp01(boost::math::cdf(boost::math::complement(dist, x)));
}

double studentized_range_cdf(double q, double k, double df) {
  require(k >= 2.0 && df >= 1.0, "studentized_range: need k >= 2 and df >= 1");
  require(!std::isnan(q), "studentized_range: q is NaN");
  if (q <= 0.0) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (std::isinf(df) || df > 1e6) return normal_range_cdf(q, k);

  // Density of s = sqrt(chi2_df / df).
  const double half = 0.5 * df;
  const double log_norm = std::log(2.0) + half * std::log(df) - half * std::log(2.0) - std::lgamma(half);
  auto density = [=](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_norm + (df - 1.0) * std::log(s) - half * s * s);
  };

  // Mean and sd of s bound the region holding essentially all its mass.
  const double mean = std::exp(0.5 * std::log(2.0 / df) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(half));
  const double sd = std::sqrt(std::max(1.0 - mean * mean, 1e-12));
  const double lo = std::max(0.0, mean - 14.0 * sd);
  const double hi = mean + 14.0 * sd;

  auto integrand = [&](double s) {
    const double f = density(s);
    return f == 0.0 ? 0.0 : f * normal_range_cdf(q * s, k);
  };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  constexpr int pieces = 8;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double a = lo + (hi - lo) * i / pieces;
    const double b = lo + (hi - lo) * (i + 1) / pieces;
    total += Quad::integrate(integrand, a, b, 10, 1e-10);
  }
  return clamp01(total);
}

double studentized_range_sf(double q, double k, double df) { return clamp01(1.0 - studentized_range_cdf(q, k, df)); }

double studentized_range_quantile(double p, double k, double df) {
  require(p > 0.0 && p < 1.0, "studentized_range_quantile: p must be in (0,1)");
  double lo = 0.0;
  double hi = 4.0;
  while (studentized_range_cdf(hi, k, df) < p) {
    lo = hi;
    hi *= 2.0;
    require(hi < 1e6, "studentized_range_quantile: failed to bracket");
  }
  for (int i = 0; i < 60 && hi - lo > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (studentized_range_cdf(mid, k, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double dist_cdf(DistKind kind, DistParams params, double x) {
  switch (kind) {
    case DistKind::StudentT: return student_t_cdf(x, params.a);
    case DistKind::F: return f_cdf(x, params.a, params.b);
    case DistKind::StudentizedRange: return studentized_range_cdf(x, params.a, params.b);
  }
  throw Error(ErrorKind::Domain, "dist_cdf: unknown distribution");
}

double dist_sf(DistKind kind, DistParams params, double x) {
  switch (kind) {
    case DistKind::StudentT: return clamp01(1.0 - student_t_cdf(x, params.a));
    case DistKind::F: return f_sf(x, params.a, params.b);
    case DistKind::StudentizedRange: return studentized_range_sf(x, params.a, params.b);
  }
  throw Error(ErrorKind::Domain, "dist_sf: unknown distribution");
}

}  // namespace parity

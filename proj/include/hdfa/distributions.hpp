#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "hdfa/errors.hpp"

namespace hdfa {

namespace detail {

// Regularized incomplete gamma functions P(a,x) and Q(a,x), computed with
// the classic series / continued-fraction split at x = a+1.  The iteration
// caps are generous because the split point needs O(sqrt(a)) terms and we
// serve degrees of freedom up to ~10^6.

inline double gamma_p_series(double a, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (long n = 0; n < 100000000L; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * eps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw Error("gamma_p: series did not converge (a=" + std::to_string(a) + ")");
}

inline double gamma_q_contfrac(double a, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double fpmin = std::numeric_limits<double>::min() / eps;
  // Lentz's algorithm for the continued fraction of Q(a,x).
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (long i = 1; i < 100000000L; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= eps)
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw Error("gamma_q: continued fraction did not converge (a=" + std::to_string(a) + ")");
}

inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw InvalidInput("gamma_p: need x >= 0 and a > 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw InvalidInput("gamma_q: need x >= 0 and a > 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

}  // namespace detail

/// P(chi2_df > x).
inline double chisq_sf(double df, double x) {
  if (!(df > 0.0)) throw InvalidInput("chisq_sf: df must be > 0");
  if (x < 0.0) throw InvalidInput("chisq_sf: x must be >= 0");
  return detail::gamma_q(df / 2.0, x / 2.0);
}

/// P(chi2_df <= x).
inline double chisq_cdf(double df, double x) {
  if (!(df > 0.0)) throw InvalidInput("chisq_cdf: df must be > 0");
  if (x < 0.0) throw InvalidInput("chisq_cdf: x must be >= 0");
  return detail::gamma_p(df / 2.0, x / 2.0);
}

/// Chi-square density, evaluated in log space to survive large df.
inline double chisq_pdf(double df, double x) {
  if (x <= 0.0) return 0.0;
  const double a = df / 2.0;
  return std::exp((a - 1.0) * std::log(x) - x / 2.0 - std::lgamma(a) - a * std::log(2.0));
}

/// P(Z > z) for standard normal Z.
inline double std_normal_sf(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

/// Standard normal quantile (Wichura's AS 241, PPND16).
inline double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidInput("std_normal_quantile: u must be in (0,1)");
  const double q = u - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = (q < 0.0) ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

/// x with P(chi2_df > x) = alpha.  Wilson-Hilferty start, then Newton
/// iterations guarded by a bisection bracket; the acceptance tolerance is
/// CDF consistency, not speed.
inline double chisq_upper_quantile(double df, double alpha) {
  if (!(df > 0.0)) throw InvalidInput("chisq_upper_quantile: df must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInput("chisq_upper_quantile: alpha must be in (0,1)");

  const double z = std_normal_quantile(1.0 - alpha);
  const double d = 2.0 / (9.0 * df);
  double x = df * std::pow(std::max(1e-8, 1.0 - d + z * std::sqrt(d)), 3.0);
  if (!(x > 0.0) || !std::isfinite(x)) x = df;

  // Expand to a bracket [lo, hi] with sf(lo) >= alpha >= sf(hi).
  double lo = x, hi = x;
  while (chisq_sf(df, lo) < alpha && lo > std::numeric_limits<double>::min()) lo *= 0.5;
  while (chisq_sf(df, hi) > alpha) hi = hi * 2.0 + 1.0;

  for (int it = 0; it < 200; ++it) {
    const double f = chisq_sf(df, x) - alpha;
    if (f > 0.0)
      lo = x;
    else
      hi = x;
    if (std::fabs(f) < 1e-13) break;
    const double dfdx = -chisq_pdf(df, x);
    double next = (dfdx != 0.0) ? x - f / dfdx : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-15 * std::max(1.0, std::fabs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace hdfa

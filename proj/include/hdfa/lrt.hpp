#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hdfa/core_stats.hpp"
#include "hdfa/distributions.hpp"
#include "hdfa/factor_mle.hpp"

namespace hdfa {

enum class Correction { None, Bartlett };
enum class Calibration { ChiSq, HdNormal };

inline const char* to_string(Correction c) {
  return c == Correction::None ? "none" : "bartlett";
}
inline const char* to_string(Calibration c) {
  return c == Calibration::ChiSq ? "chisq" : "hd-normal";
}

enum class Verdict { Safe, Borderline, Failing };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Safe: return "safe";
    case Verdict::Borderline: return "borderline";
    default: return "failing";
  }
}

/// Finite-sample thresholds used to map the asymptotic conditions
/// p/N^{1/2} -> 0 and p/N^{2/3} -> 0 to advisory verdicts.  The theory gives
/// no finite cutoffs; these defaults flip near where the type I error
/// visibly starts to inflate, and they are configurable.
struct RegimeThresholds {
  double safe_below = 0.1;
  double failing_at = 1.0;
};

/// Phase-transition report for a given (N, p): the chi-square calibration is
/// governed by p^2/N, the Bartlett-corrected one by p^3/N^2.
struct RegimeReport {
  int n_obs = 0;
  int p = 0;
  double epsilon = 0.0;     // ln p / ln N
  double ratio_sq = 0.0;    // p^2 / N
  double ratio_cube = 0.0;  // p^3 / N^2
  Verdict chisq_valid = Verdict::Safe;
  Verdict bartlett_valid = Verdict::Safe;
  RegimeThresholds thresholds;
};

inline Verdict classify_ratio(double ratio, const RegimeThresholds& t) {
  if (ratio < t.safe_below) return Verdict::Safe;
  if (ratio < t.failing_at) return Verdict::Borderline;
  return Verdict::Failing;
}

inline RegimeReport regime_diagnostic(int n_obs, int p, RegimeThresholds thresholds = {}) {
  if (n_obs < 2 || p < 1) throw InvalidInput("regime_diagnostic: need N >= 2 and p >= 1");
  RegimeReport r;
  r.n_obs = n_obs;
  r.p = p;
  r.epsilon = std::log(static_cast<double>(p)) / std::log(static_cast<double>(n_obs));
  r.ratio_sq = static_cast<double>(p) * p / n_obs;
  r.ratio_cube = static_cast<double>(p) * p * p / (static_cast<double>(n_obs) * n_obs);
  r.chisq_valid = classify_ratio(r.ratio_sq, thresholds);
  r.bartlett_valid = classify_ratio(r.ratio_cube, thresholds);
  r.thresholds = thresholds;
  return r;
}

/// Normal-limit calibration constants: the standardized statistic
/// (T + n*mu)/(n*sigma) is referred to N(0,1).
struct HdCalibration {
  double mu = 0.0;
  double sigma = 0.0;
  int n = 0;  // N - 1
};

namespace detail {

inline void check_hd_range(int n_obs, int p, const char* what) {
  const int n = n_obs - 1;
  if (p < 1 || p > n - 1)
    throw InvalidInput(std::string(what) + ": need 1 <= p <= N-2, got N=" +
                       std::to_string(n_obs) + ", p=" + std::to_string(p));
}

}  // namespace detail

/// mu_{n,0} = (p-n+1/2) log(1-p/n) - (n-1)p/n,
/// sigma_{n,0}^2 = -2 { p/n + log(1-p/n) },  n = N-1.
inline HdCalibration hd_calibration_t0(int n_obs, int p) {
  detail::check_hd_range(n_obs, p, "hd_calibration_t0");
  const double n = n_obs - 1;
  const double log1m = std::log1p(-p / n);
  HdCalibration c;
  c.n = n_obs - 1;
  c.mu = (p - n + 0.5) * log1m - (n - 1.0) / n * p;
  c.sigma = std::sqrt(-2.0 * (p / n + log1m));
  return c;
}

/// mu_n = -p + (p-n+1/2) log(1-p/n); sigma_n identical to sigma_{n,0}.
inline HdCalibration hd_calibration_tprime(int n_obs, int p) {
  detail::check_hd_range(n_obs, p, "hd_calibration_tprime");
  const double n = n_obs - 1;
  const double log1m = std::log1p(-p / n);
  HdCalibration c;
  c.n = n_obs - 1;
  c.mu = -static_cast<double>(p) + (p - n + 0.5) * log1m;
  c.sigma = std::sqrt(-2.0 * (p / n + log1m));
  return c;
}

/// Outcome of one likelihood ratio test.  All tests reject for large values
/// of the (possibly corrected) statistic; p-values are upper-tail.
struct TestResult {
  double statistic = 0.0;            // uncorrected T
  double corrected_statistic = 0.0;  // rho * T
  Correction correction = Correction::None;
  Calibration calibration = Calibration::ChiSq;
  double df = 0.0;
  double rho = 1.0;
  double p_value = 1.0;
  RegimeReport regime;
  std::optional<HdCalibration> hd;
  bool mle_converged = true;
  bool mle_at_floor = false;
  std::vector<std::string> warnings;

  bool rejected(double alpha) const { return p_value < alpha; }
};

namespace detail {

inline void finalize_chisq(TestResult& r) {
  const double used = r.correction == Correction::Bartlett ? r.corrected_statistic : r.statistic;
  r.p_value = chisq_sf(r.df, std::max(0.0, used));
}

inline void add_regime_warning(TestResult& r) {
  const Verdict v = r.calibration == Calibration::HdNormal ? Verdict::Safe
                    : (r.correction == Correction::Bartlett ? r.regime.bartlett_valid
                                                            : r.regime.chisq_valid);
  if (v == Verdict::Failing)
    r.warnings.push_back(
        "chi-square calibration is outside its validity regime for this (N, p); "
        "the reported p-value is unreliable");
  else if (v == Verdict::Borderline)
    r.warnings.push_back("chi-square calibration is borderline for this (N, p)");
}

}  // namespace detail

/// Test of H_{0,0}: no common factors (population correlation = identity).
/// T0 = -(N-1) log|R_hat|, f0 = p(p-1)/2, rho0 = 1 - (2p+5)/(6(N-1)).
inline TestResult test_no_factor(const DataMatrix& data, Correction correction,
                                 Calibration calibration = Calibration::ChiSq,
                                 RegimeThresholds thresholds = {}) {
  const int n_obs = data.n();
  const int p = data.p();
  if (p < 2) throw InvalidInput("test_no_factor: p must be >= 2 (f0 = 0 otherwise)");
  if (correction == Correction::Bartlett && calibration == Calibration::HdNormal)
    throw UnsupportedCombination(
        "test_no_factor: the normal limit calibrates the uncorrected statistic; "
        "bartlett + hd-normal is not defined");

  TestResult r;
  r.correction = correction;
  r.calibration = calibration;
  r.regime = regime_diagnostic(n_obs, p, thresholds);
  if (n_obs < p + 5)
    r.warnings.push_back("N < p + 5: below the stated validity condition; the statistic "
                         "exists only while the sample correlation stays positive definite");

  CorrMatrix corr = sample_correlation(data);
  double logdet;
  try {
    logdet = logdet_spd(corr.values);
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite("test_no_factor: sample correlation matrix is singular "
                              "(N <= p leaves no likelihood ratio)",
                              e.pivot_index, e.pivot_value);
  }
  const double n = n_obs - 1;
  r.statistic = -n * logdet;
  r.df = static_cast<double>(p) * (p - 1) / 2.0;
  r.rho = 1.0 - (2.0 * p + 5.0) / (6.0 * n);
  r.corrected_statistic = r.rho * r.statistic;

  if (calibration == Calibration::ChiSq) {
    detail::finalize_chisq(r);
  } else {
    const HdCalibration c = hd_calibration_t0(n_obs, p);
    r.hd = c;
    r.p_value = std_normal_sf((r.statistic + c.n * c.mu) / (c.n * c.sigma));
  }
  detail::add_regime_warning(r);
  return r;
}

/// Test of H_{0,k}: a k-factor model fits.  The statistic follows the
/// covariance form with Sigma_k estimated by maximum likelihood:
/// T_k = (N-1){ log|Sigma_k| - log|S| + tr(S Sigma_k^{-1}) - p }.
inline TestResult test_k_factor(const DataMatrix& data, int k, Correction correction,
                                SolverOptions opts = {}, RegimeThresholds thresholds = {},
                                Calibration calibration = Calibration::ChiSq) {
  const int n_obs = data.n();
  const int p = data.p();
  if (calibration != Calibration::ChiSq)
    throw UnsupportedCombination(
        "test_k_factor: no normal limit is established for the estimated-model statistic; "
        "use the chisq calibration");
  const long fk = factor_test_df(p, k);
  if (fk <= 0)
    throw InvalidInput("test_k_factor: model saturated, f_k = " + std::to_string(fk) +
                       " <= 0 for p=" + std::to_string(p) + ", k=" + std::to_string(k));

  TestResult r;
  r.correction = correction;
  r.calibration = Calibration::ChiSq;
  r.regime = regime_diagnostic(n_obs, p, thresholds);
  if (n_obs < p + 5) r.warnings.push_back("N < p + 5: below the stated validity condition");

  CovMatrix s = sample_covariance(data);
  MleFit fit = fit_factor_model(s, k, opts);
  r.mle_converged = fit.converged;
  r.mle_at_floor = fit.at_floor;
  if (!fit.converged)
    r.warnings.push_back("factor MLE did not converge after " +
                         std::to_string(fit.iterations) + " iterations; statistic uses the "
                         "best iterate");
  if (fit.at_floor)
    r.warnings.push_back("factor MLE hit the uniqueness floor (Heywood guard)");

  const Matrix sigma_k = fit.model.implied_sigma();
  const double n = n_obs - 1;
  r.statistic = n * (logdet_spd(sigma_k) - logdet_spd(s.values) +
                     trace_prod_inv(s.values, sigma_k) - p);
  r.df = static_cast<double>(fk);
  r.rho = 1.0 - (2.0 * p + 5.0 + 4.0 * k) / (6.0 * n);
  r.corrected_statistic = r.rho * r.statistic;
  detail::finalize_chisq(r);
  detail::add_regime_warning(r);
  return r;
}

/// Test of H'_{0,k}: Sigma equals a fully specified matrix.
/// T' = (N-1){ log|Sigma_0| - log|S| + tr(S Sigma_0^{-1}) - p },
/// f' = p(p+1)/2, rho' = 1 - (2p^2+3p-1)/{6(N-1)(p+1)}.
inline TestResult test_given_sigma(const DataMatrix& data, const Matrix& sigma0,
                                   Correction correction,
                                   Calibration calibration = Calibration::ChiSq,
                                   RegimeThresholds thresholds = {}) {
  const int n_obs = data.n();
  const int p = data.p();
  if (sigma0.rows() != p || sigma0.cols() != p)
    throw ShapeMismatch("test_given_sigma: sigma0 is " + std::to_string(sigma0.rows()) + "x" +
                        std::to_string(sigma0.cols()) + ", data has p=" + std::to_string(p));
  if (correction == Correction::Bartlett && calibration == Calibration::HdNormal)
    throw UnsupportedCombination(
        "test_given_sigma: the normal limit calibrates the uncorrected statistic; "
        "bartlett + hd-normal is not defined");

  TestResult r;
  r.correction = correction;
  r.calibration = calibration;
  r.regime = regime_diagnostic(n_obs, p, thresholds);
  if (n_obs < p + 2) r.warnings.push_back("N < p + 2: below the stated validity condition");

  const SpdFactor sigma0_chol = SpdFactor::compute(sigma0);
  CovMatrix s = sample_covariance(data);
  const double n = n_obs - 1;
  r.statistic = n * (sigma0_chol.log_det() - logdet_spd(s.values) +
                     sigma0_chol.solve(s.values).trace() - p);
  r.df = static_cast<double>(p) * (p + 1) / 2.0;
  r.rho = 1.0 - (2.0 * p * p + 3.0 * p - 1.0) / (6.0 * n * (p + 1.0));
  r.corrected_statistic = r.rho * r.statistic;

  if (calibration == Calibration::ChiSq) {
    detail::finalize_chisq(r);
  } else {
    const HdCalibration c = hd_calibration_tprime(n_obs, p);
    r.hd = c;
    r.p_value = std_normal_sf((r.statistic + c.n * c.mu) / (c.n * c.sigma));
  }
  detail::add_regime_warning(r);
  return r;
}

inline TestResult test_given_sigma(const DataMatrix& data, const FactorModel& model,
                                   Correction correction,
                                   Calibration calibration = Calibration::ChiSq,
                                   RegimeThresholds thresholds = {}) {
  return test_given_sigma(data, model.implied_sigma(), correction, calibration, thresholds);
}

}  // namespace hdfa

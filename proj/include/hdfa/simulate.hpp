#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hdfa/lrt.hpp"
#include "hdfa/sampler.hpp"
#include "hdfa/sequential.hpp"

namespace hdfa {

/// Exact rational exponent for the p = floor(N^epsilon) grids.
struct Rational {
  int num = 0;
  int den = 1;

  double value() const { return static_cast<double>(num) / den; }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  bool operator==(const Rational&) const = default;
};

/// floor(N^eps) with a snap to the nearest integer when the floating-point
/// power lands within 1e-9 of it (N=1000, eps=8/24 must give exactly 10).
inline int dimension_for(int n, Rational eps) {
  const double x = std::exp(eps.value() * std::log(static_cast<double>(n)));
  const double r = std::round(x);
  if (std::fabs(x - r) < 1e-9 * std::max(1.0, x)) return static_cast<int>(r);
  return static_cast<int>(std::floor(x));
}

enum class Experiment { TypeIH00, TypeIHk, TypeITPrime, Selection, Histogram };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::TypeIH00: return "typeI-h00";
    case Experiment::TypeIHk: return "typeI-hk";
    case Experiment::TypeITPrime: return "typeI-tprime";
    case Experiment::Selection: return "selection";
    default: return "histogram";
  }
}

/// Data-generating process, instantiated per grid cell (the factor models
/// depend on p, so only the recipe is stored here).
struct GeneratorTemplate {
  GeneratorKind kind = GeneratorKind::IidNormal;
  int k0 = 1;
  int t_df = 5;
  DiscretizeSetting setting = DiscretizeSetting::I;

  std::string str() const {
    switch (kind) {
      case GeneratorKind::IidNormal: return "iid-normal";
      case GeneratorKind::FactorNormal: return "factor-normal(k0=" + std::to_string(k0) + ")";
      case GeneratorKind::IidT: return "iid-t(" + std::to_string(t_df) + ")";
      case GeneratorKind::Discretized:
        return std::string("discretized(") +
               (setting == DiscretizeSetting::I ? "I" : setting == DiscretizeSetting::II ? "II"
                                                                                         : "III") +
               ")";
    }
    return "?";
  }
};

struct SimConfig {
  Experiment experiment = Experiment::TypeIH00;
  std::vector<int> n_list;
  std::vector<Rational> epsilon_list;
  std::vector<int> p_list;  // alternative to epsilon_list for explicit-p grids
  GeneratorTemplate generator;
  int replications = 1000;
  double alpha = 0.05;
  std::vector<Correction> corrections = {Correction::None, Correction::Bartlett};
  std::vector<Calibration> calibrations = {Calibration::ChiSq};
  std::uint64_t seed = 20260401ULL;
  int k = -1;      // factor order tested by typeI-hk; -1 means generator.k0
  int k_max = -1;  // selection search cap; -1 means the df bound

  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    if (n_list.empty()) errs.push_back("N list is empty");
    for (int n : n_list)
      if (n < 2) errs.push_back("N=" + std::to_string(n) + " is below 2");
    if (epsilon_list.empty() && p_list.empty())
      errs.push_back("neither epsilon nor p grid given");
    if (!epsilon_list.empty() && !p_list.empty())
      errs.push_back("epsilon and p grids are mutually exclusive");
    for (const Rational& e : epsilon_list) {
      if (e.den <= 0) errs.push_back("epsilon denominator must be positive");
      if (e.num <= 0) errs.push_back("epsilon must be positive");
    }
    for (int n : n_list)
      for (const Rational& e : epsilon_list)
        if (e.den > 0 && dimension_for(n, e) < 1)
          errs.push_back("grid point N=" + std::to_string(n) + ", eps=" + e.str() +
                         " gives p < 1");
    for (int p : p_list)
      if (p < 1) errs.push_back("p=" + std::to_string(p) + " is below 1");
    if (replications < 0) errs.push_back("replications must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) errs.push_back("alpha must be in (0,1)");
    if (corrections.empty()) errs.push_back("correction list is empty");
    if (calibrations.empty()) errs.push_back("calibration list is empty");
    if (experiment == Experiment::TypeIHk || experiment == Experiment::Selection) {
      if (generator.kind != GeneratorKind::FactorNormal)
        errs.push_back(std::string(to_string(experiment)) +
                       " requires a factor-normal generator with known k0");
    }
    if (experiment == Experiment::TypeITPrime &&
        generator.kind != GeneratorKind::FactorNormal &&
        generator.kind != GeneratorKind::IidNormal)
      errs.push_back("typeI-tprime requires iid-normal or factor-normal data "
                     "(the reference covariance must be known)");
    if (generator.kind == GeneratorKind::FactorNormal &&
        generator.k0 != 1 && generator.k0 != 3)
      errs.push_back("factor-normal generator supports k0 in {1,3}");
    for (Calibration c : calibrations)
      if (c == Calibration::HdNormal && experiment == Experiment::TypeIHk)
        errs.push_back("hd-normal calibration is not defined for the estimated-model test");
    return errs;
  }
};

/// One tabulated result row; `skipped` marks grid points whose test is not
/// defined (it is reported, never silently dropped).
struct SimRow {
  int n_obs = 0;
  std::string epsilon;
  int p = 0;
  std::string mode;
  std::string correction;
  std::string metric;
  double value = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
  int replications = 0;
  int failed = 0;
  bool skipped = false;
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

struct SimGridResult {
  std::vector<SimRow> rows;

  /// Fixed schema: N,epsilon,p,mode,correction,metric,value,mc_se,replications,failed
  std::string to_csv() const {
    std::string out = "N,epsilon,p,mode,correction,metric,value,mc_se,replications,failed\n";
    for (const SimRow& r : rows) {
      out += std::to_string(r.n_obs) + "," + r.epsilon + "," + std::to_string(r.p) + "," +
             r.mode + "," + r.correction + "," + r.metric + "," + detail::fmt_double(r.value) +
             "," + detail::fmt_double(r.mc_se) + "," + std::to_string(r.replications) + "," +
             std::to_string(r.failed) + "\n";
    }
    return out;
  }

  /// Structured-text mirror of the same fields, one [row] block per row.
  std::string to_text() const {
    std::string out;
    for (const SimRow& r : rows) {
      out += "[row]\n";
      out += "N = " + std::to_string(r.n_obs) + "\n";
      out += "epsilon = " + r.epsilon + "\n";
      out += "p = " + std::to_string(r.p) + "\n";
      out += "mode = " + r.mode + "\n";
      out += "correction = " + r.correction + "\n";
      out += "metric = " + r.metric + "\n";
      out += "value = " + detail::fmt_double(r.value) + "\n";
      out += "mc_se = " + detail::fmt_double(r.mc_se) + "\n";
      out += "replications = " + std::to_string(r.replications) + "\n";
      out += "failed = " + std::to_string(r.failed) + "\n";
      out += "skipped = " + std::string(r.skipped ? "true" : "false") + "\n\n";
    }
    return out;
  }
};

using Progress = std::function<void(const std::string&)>;

namespace detail {

/// Runs body(0..count-1) on `threads` workers.  Work items land in
/// caller-owned slots indexed by item, so results do not depend on worker
/// count or completion order.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
  };
  std::vector<std::thread> pool;
  const int width = std::min(threads, count);
  pool.reserve(width);
  for (int t = 0; t < width; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct Cell {
  int n_obs;
  int p;
  std::string epsilon;
  std::uint64_t index;  // stable across runs; feeds the stream hash
};

inline std::vector<Cell> make_cells(const SimConfig& cfg) {
  std::vector<Cell> cells;
  std::uint64_t idx = 0;
  for (int n : cfg.n_list) {
    if (!cfg.p_list.empty()) {
      for (int p : cfg.p_list) {
        char eps[32];
        std::snprintf(eps, sizeof(eps), "%.6f",
                      std::log(static_cast<double>(p)) / std::log(static_cast<double>(n)));
        cells.push_back({n, p, eps, idx++});
      }
    } else {
      for (const Rational& e : cfg.epsilon_list)
        cells.push_back({n, dimension_for(n, e), e.str(), idx++});
    }
  }
  return cells;
}

inline GeneratorSpec instantiate(const GeneratorTemplate& g, int p, std::uint64_t seed,
                                 std::uint64_t stream) {
  switch (g.kind) {
    case GeneratorKind::IidNormal: return GeneratorSpec::iid_normal(seed, stream);
    case GeneratorKind::IidT: return GeneratorSpec::iid_t(g.t_df, seed, stream);
    case GeneratorKind::Discretized: return GeneratorSpec::discretized(g.setting, seed, stream);
    case GeneratorKind::FactorNormal:
      return GeneratorSpec::factor_normal(build_example_model(g.k0, p), seed, stream);
  }
  throw InvalidInput("instantiate: unknown generator kind");
}

inline double binomial_se(double rate, int n) {
  return n > 0 ? std::sqrt(rate * (1.0 - rate) / n) : std::numeric_limits<double>::quiet_NaN();
}

/// R type-7 quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline void check_config(const SimConfig& cfg) {
  const auto errs = cfg.validate();
  if (!errs.empty()) {
    std::string msg = "invalid simulation config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw InvalidInput(msg);
  }
}

inline void note_scale(const SimConfig& cfg, const Progress& progress) {
  if (!progress) return;
  bool big = false;
  for (int n : cfg.n_list) big = big || n > 2000;
  for (const Rational& e : cfg.epsilon_list) big = big || e.value() > 23.0 / 24.0 + 1e-12;
  if (big)
    progress("note: grid exceeds the desk-scale defaults (N <= 2000, epsilon <= 23/24); "
             "expect a materially longer run");
}

}  // namespace detail

/// Type I error over the (N, epsilon) grid for the configured test.  Each
/// replication r of grid cell g draws from sampler stream hash(g, r), so
/// results are identical at any worker count.  Failed replications (singular
/// correlation, non-converged MLE) are tabulated in the `failed` column and
/// excluded from the rate denominator.
inline SimGridResult run_type1_grid(const SimConfig& cfg, int threads = 0,
                                    const Progress& progress = {}) {
  detail::check_config(cfg);
  detail::note_scale(cfg, progress);
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());

  SimGridResult out;
  const auto cells = detail::make_cells(cfg);
  const int reps = cfg.replications;

  for (const auto& cell : cells) {
    const int n_obs = cell.n_obs;
    const int p = cell.p;
    const bool tprime = cfg.experiment == Experiment::TypeITPrime;
    const bool hk = cfg.experiment == Experiment::TypeIHk;
    const int k_test = hk ? (cfg.k >= 0 ? cfg.k : cfg.generator.k0) : 0;

    bool skip = reps == 0;
    std::string kind;
    if (tprime) {
      kind = "tprime";
      skip = skip || n_obs < p + 2;
    } else if (hk) {
      kind = "tk";
      skip = skip || n_obs < p + 5 || factor_test_df(p, k_test) <= 0 ||
             (cfg.generator.k0 == 1 && p < 2) || (cfg.generator.k0 == 3 && p < 4);
    } else {
      kind = "t0";
      skip = skip || n_obs < p + 5 || p < 2;
    }

    std::vector<double> stat(std::max(reps, 0),
                             std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> failed(std::max(reps, 0), 0);

    if (!skip) {
      std::optional<Matrix> sigma0;
      if (tprime)
        sigma0 = cfg.generator.kind == GeneratorKind::IidNormal
                     ? Matrix(Matrix::Identity(p, p))
                     : build_example_model(cfg.generator.k0, p).implied_sigma();
      detail::parallel_for(reps, threads, [&](int r) {
        try {
          const GeneratorSpec spec = detail::instantiate(cfg.generator, p, cfg.seed,
                                                         stream_for(cell.index, r));
          const DataMatrix data = sample(spec, n_obs, p);
          if (tprime) {
            stat[r] = test_given_sigma(data, *sigma0, Correction::None).statistic;
          } else if (hk) {
            TestResult t = test_k_factor(data, k_test, Correction::None);
            if (!t.mle_converged) {
              failed[r] = 1;
              return;
            }
            stat[r] = t.statistic;
          } else {
            stat[r] = test_no_factor(data, Correction::None).statistic;
          }
        } catch (const std::exception&) {
          failed[r] = 1;
        }
      });
    }

    const int n_failed = skip ? 0 : static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    const int n_used = skip ? 0 : reps - n_failed;
    const double n = n_obs - 1;
    const double df = tprime ? p * (p + 1.0) / 2.0
                             : static_cast<double>(factor_test_df(p, hk ? k_test : 0));
    double rho;
    if (tprime)
      rho = 1.0 - (2.0 * p * p + 3.0 * p - 1.0) / (6.0 * n * (p + 1.0));
    else
      rho = 1.0 - (2.0 * p + 5.0 + 4.0 * (hk ? k_test : 0)) / (6.0 * n);

    for (Calibration cal : cfg.calibrations) {
      for (Correction corr : cfg.corrections) {
        if (cal == Calibration::HdNormal && corr == Correction::Bartlett) continue;
        const std::string mode =
            kind + (cal == Calibration::HdNormal ? "-hd-normal" : "-chisq");
        SimRow row;
        row.n_obs = n_obs;
        row.epsilon = cell.epsilon;
        row.p = p;
        row.mode = mode;
        row.correction = to_string(corr);
        row.metric = "rejection_rate";
        row.replications = n_used;
        row.failed = n_failed;
        row.skipped = skip;
        const bool cal_ok = !(cal == Calibration::HdNormal && (p < 1 || p > n_obs - 2));
        if (!skip && n_used > 0 && cal_ok) {
          int rejections = 0;
          double sum_z = 0.0, sum_z2 = 0.0;
          HdCalibration c;
          double threshold;
          if (cal == Calibration::HdNormal) {
            c = tprime ? hd_calibration_tprime(n_obs, p) : hd_calibration_t0(n_obs, p);
            threshold = std_normal_quantile(1.0 - cfg.alpha);
          } else {
            threshold = chisq_upper_quantile(df, cfg.alpha);
          }
          for (int r = 0; r < reps; ++r) {
            if (failed[r]) continue;
            double value;
            if (cal == Calibration::HdNormal) {
              value = (stat[r] + c.n * c.mu) / (c.n * c.sigma);
              sum_z += value;
              sum_z2 += value * value;
            } else {
              value = corr == Correction::Bartlett ? rho * stat[r] : stat[r];
            }
            if (value > threshold) ++rejections;
          }
          row.value = static_cast<double>(rejections) / n_used;
          row.mc_se = detail::binomial_se(row.value, n_used);
          out.rows.push_back(row);
          if (cal == Calibration::HdNormal) {
            const double mean_z = sum_z / n_used;
            const double var_z =
                n_used > 1 ? (sum_z2 - n_used * mean_z * mean_z) / (n_used - 1) : 0.0;
            SimRow zrow = row;
            zrow.metric = "mean_std";
            zrow.value = mean_z;
            zrow.mc_se = std::sqrt(std::max(var_z, 0.0) / n_used);
            out.rows.push_back(zrow);
            zrow.metric = "sd_std";
            zrow.value = std::sqrt(std::max(var_z, 0.0));
            zrow.mc_se = std::numeric_limits<double>::quiet_NaN();
            out.rows.push_back(zrow);
          }
        } else {
          row.skipped = true;
          row.replications = 0;
          row.failed = 0;
          out.rows.push_back(row);
        }
      }
    }
    if (progress)
      progress("cell N=" + std::to_string(n_obs) + " eps=" + cell.epsilon +
               " p=" + std::to_string(p) + (skip ? " skipped" : " done"));
  }
  return out;
}

/// Proportions of correct/over/under estimation of the number of factors by
/// the sequential procedure, per correction mode.  The per-k fits are shared
/// between correction modes (the statistic does not depend on the
/// correction), which matches running select_num_factors separately.
inline SimGridResult run_selection_grid(const SimConfig& cfg, int threads = 0,
                                        const Progress& progress = {}) {
  detail::check_config(cfg);
  detail::note_scale(cfg, progress);
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());

  SimGridResult out;
  const auto cells = detail::make_cells(cfg);
  const int reps = cfg.replications;
  const int k0 = cfg.generator.k0;
  const int n_corr = static_cast<int>(cfg.corrections.size());

  for (const auto& cell : cells) {
    const int n_obs = cell.n_obs;
    const int p = cell.p;
    const bool skip = reps == 0 || n_obs < p + 5 || p < 2 || (k0 == 3 && p < 4);
    const int k_cap_df = max_testable_k(p);
    const int k_cap = cfg.k_max >= 0 ? std::min(cfg.k_max, k_cap_df) : k_cap_df;

    // khat_class[r*n_corr + c]: -2 failed, otherwise the effective k-hat
    // (k_cap+1 when the search exhausted its budget while still rejecting).
    std::vector<int> khat(std::max(reps, 0) * n_corr, -2);

    if (!skip) {
      detail::parallel_for(reps, threads, [&](int r) {
        try {
          const GeneratorSpec spec = detail::instantiate(cfg.generator, p, cfg.seed,
                                                         stream_for(cell.index, r));
          const DataMatrix data = sample(spec, n_obs, p);
          std::vector<bool> walking(n_corr, true);
          int n_walking = n_corr;
          CovMatrix s = sample_covariance(data);
          for (int k = 0; k <= k_cap && n_walking > 0; ++k) {
            double t_stat = 0.0, df = 0.0, rho = 1.0;
            bool converged = true;
            if (k == 0) {
              TestResult t0 = test_no_factor(data, Correction::None);
              t_stat = t0.statistic;
              df = t0.df;
              rho = t0.rho;
            } else {
              MleFit fit = fit_factor_model(s, k);
              converged = fit.converged;
              if (converged) {
                const Matrix sigma_k = fit.model.implied_sigma();
                t_stat = (n_obs - 1.0) * (logdet_spd(sigma_k) - logdet_spd(s.values) +
                                          trace_prod_inv(s.values, sigma_k) - p);
              }
              df = static_cast<double>(factor_test_df(p, k));
              rho = 1.0 - (2.0 * p + 5.0 + 4.0 * k) / (6.0 * (n_obs - 1.0));
            }
            for (int c = 0; c < n_corr; ++c) {
              if (!walking[c]) continue;
              if (!converged) {
                khat[r * n_corr + c] = -2;
                walking[c] = false;
                --n_walking;
                continue;
              }
              const double used =
                  cfg.corrections[c] == Correction::Bartlett ? rho * t_stat : t_stat;
              if (chisq_sf(df, std::max(0.0, used)) >= cfg.alpha) {
                khat[r * n_corr + c] = k;
                walking[c] = false;
                --n_walking;
              }
            }
          }
          for (int c = 0; c < n_corr; ++c)
            if (walking[c]) khat[r * n_corr + c] = k_cap + 1;  // exhausted while rejecting
        } catch (const std::exception&) {
          // leave all corrections marked failed for this replication
        }
      });
    }

    for (int c = 0; c < n_corr; ++c) {
      int n_correct = 0, n_over = 0, n_under = 0, n_failed = 0;
      for (int r = 0; r < (skip ? 0 : reps); ++r) {
        const int kh = khat[r * n_corr + c];
        if (kh == -2)
          ++n_failed;
        else if (kh == k0)
          ++n_correct;
        else if (kh > k0)
          ++n_over;
        else
          ++n_under;
      }
      const int n_used = skip ? 0 : reps - n_failed;
      const struct {
        const char* name;
        int count;
      } metrics[] = {{"correct_rate", n_correct}, {"over_rate", n_over}, {"under_rate", n_under}};
      for (const auto& m : metrics) {
        SimRow row;
        row.n_obs = n_obs;
        row.epsilon = cell.epsilon;
        row.p = p;
        row.mode = "selection";
        row.correction = to_string(cfg.corrections[c]);
        row.metric = m.name;
        row.replications = n_used;
        row.failed = skip ? 0 : n_failed;
        row.skipped = skip;
        if (!skip && n_used > 0) {
          row.value = static_cast<double>(m.count) / n_used;
          row.mc_se = detail::binomial_se(row.value, n_used);
        }
        out.rows.push_back(row);
      }
    }
    if (progress)
      progress("cell N=" + std::to_string(n_obs) + " eps=" + cell.epsilon +
               " p=" + std::to_string(p) + (skip ? " skipped" : " done"));
  }
  return out;
}

/// Empirical moments and quantiles of T0 and rho0*T0 against the chi-square
/// reference mean f0 and variance 2*f0.
inline SimGridResult run_histogram_summary(const SimConfig& cfg, int threads = 0,
                                           const Progress& progress = {}) {
  detail::check_config(cfg);
  detail::note_scale(cfg, progress);
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());

  SimGridResult out;
  const auto cells = detail::make_cells(cfg);
  const int reps = cfg.replications;

  for (const auto& cell : cells) {
    const int n_obs = cell.n_obs;
    const int p = cell.p;
    const bool skip = reps == 0 || n_obs < p + 5 || p < 2;

    std::vector<double> stat(std::max(reps, 0), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> failed(std::max(reps, 0), 0);
    if (!skip) {
      detail::parallel_for(reps, threads, [&](int r) {
        try {
          const GeneratorSpec spec = detail::instantiate(cfg.generator, p, cfg.seed,
                                                         stream_for(cell.index, r));
          stat[r] = test_no_factor(sample(spec, n_obs, p), Correction::None).statistic;
        } catch (const std::exception&) {
          failed[r] = 1;
        }
      });
    }
    const int n_failed = skip ? 0 : static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    const int n_used = skip ? 0 : reps - n_failed;
    const double f0 = static_cast<double>(p) * (p - 1) / 2.0;
    const double rho0 = 1.0 - (2.0 * p + 5.0) / (6.0 * (n_obs - 1.0));

    for (Correction corr : cfg.corrections) {
      const double scale = corr == Correction::Bartlett ? rho0 : 1.0;
      std::vector<double> values;
      values.reserve(n_used);
      for (int r = 0; r < (skip ? 0 : reps); ++r)
        if (!failed[r]) values.push_back(scale * stat[r]);
      std::sort(values.begin(), values.end());
      double mean = std::numeric_limits<double>::quiet_NaN();
      double var = std::numeric_limits<double>::quiet_NaN();
      if (n_used > 0) {
        double s = 0.0;
        for (double v : values) s += v;
        mean = s / n_used;
        if (n_used > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - mean) * (v - mean);
          var = ss / (n_used - 1);
        }
      }
      const struct {
        const char* name;
        double value;
        double se;
      } metrics[] = {
          {"mean", mean, n_used > 1 ? std::sqrt(var / n_used)
                                    : std::numeric_limits<double>::quiet_NaN()},
          {"variance", var, std::numeric_limits<double>::quiet_NaN()},
          {"q05", detail::quantile_sorted(values, 0.05), std::numeric_limits<double>::quiet_NaN()},
          {"q25", detail::quantile_sorted(values, 0.25), std::numeric_limits<double>::quiet_NaN()},
          {"q50", detail::quantile_sorted(values, 0.50), std::numeric_limits<double>::quiet_NaN()},
          {"q75", detail::quantile_sorted(values, 0.75), std::numeric_limits<double>::quiet_NaN()},
          {"q95", detail::quantile_sorted(values, 0.95), std::numeric_limits<double>::quiet_NaN()},
          {"ref_mean", f0, std::numeric_limits<double>::quiet_NaN()},
          {"ref_var", 2.0 * f0, std::numeric_limits<double>::quiet_NaN()},
      };
      for (const auto& m : metrics) {
        SimRow row;
        row.n_obs = n_obs;
        row.epsilon = cell.epsilon;
        row.p = p;
        row.mode = "histogram";
        row.correction = to_string(corr);
        row.metric = m.name;
        row.value = skip ? std::numeric_limits<double>::quiet_NaN() : m.value;
        row.mc_se = skip ? std::numeric_limits<double>::quiet_NaN() : m.se;
        row.replications = n_used;
        row.failed = skip ? 0 : n_failed;
        row.skipped = skip;
        out.rows.push_back(row);
      }
    }
    if (progress)
      progress("cell N=" + std::to_string(n_obs) + " eps=" + cell.epsilon +
               " p=" + std::to_string(p) + (skip ? " skipped" : " done"));
  }
  return out;
}

/// Dispatch on the configured experiment.
inline SimGridResult run_experiment(const SimConfig& cfg, int threads = 0,
                                    const Progress& progress = {}) {
  switch (cfg.experiment) {
    case Experiment::Selection: return run_selection_grid(cfg, threads, progress);
    case Experiment::Histogram: return run_histogram_summary(cfg, threads, progress);
    default: return run_type1_grid(cfg, threads, progress);
  }
}

}  // namespace hdfa

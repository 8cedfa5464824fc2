#pragma once

// Command-line front end: subcommands test, select, diagnose, simulate.
// Kept in a header so the test suite can drive it in-process.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdfa/lrt.hpp"
#include "hdfa/sequential.hpp"
#include "hdfa/simulate.hpp"

namespace hdfa::cli {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& tok, double& out) {
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0' && std::isfinite(out);
}

/// Reads a delimited numeric table (comma or whitespace), rows =
/// observations.  A first row with any non-numeric token is treated as a
/// header and skipped.
inline Matrix read_numeric_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    std::vector<double> row(toks.size());
    bool ok = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (!parse_double(toks[j], row[j])) {
        ok = false;
        bad = j;
        break;
      }
    }
    if (!ok) {
      if (first_content) {  // header row
        first_content = false;
        continue;
      }
      throw InvalidInput("'" + path + "' line " + std::to_string(lineno) + ": cell " +
                         std::to_string(bad + 1) + " ('" + toks[bad] + "') is not numeric");
    }
    first_content = false;
    if (!rows.empty() && rows.front().size() != row.size())
      throw InvalidInput("'" + path + "' line " + std::to_string(lineno) + ": has " +
                         std::to_string(row.size()) + " columns, expected " +
                         std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("'" + path + "' contains no numeric rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline DataMatrix read_data_matrix(const std::string& path) {
  return DataMatrix(read_numeric_table(path));
}

inline Matrix read_square_matrix(const std::string& path) {
  Matrix m = read_numeric_table(path);
  if (m.rows() != m.cols())
    throw InvalidInput("'" + path + "' is " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected a square matrix");
  return m;
}

// ---------------------------------------------------------------------------
// Flat key = value config files for the simulation harness.

struct ParsedConfig {
  SimConfig config;
  std::vector<std::string> errors;  // exhaustive, not first-error-only
};

inline bool parse_fraction(const std::string& s, Rational& out) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return false;
  try {
    out.num = std::stoi(s.substr(0, slash));
    out.den = std::stoi(s.substr(slash + 1));
  } catch (...) {
    return false;
  }
  return out.den > 0;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline ParsedConfig parse_sim_config_text(std::istream& in) {
  ParsedConfig pc;
  SimConfig& cfg = pc.config;
  cfg.corrections.clear();
  cfg.calibrations.clear();
  std::string line;
  int lineno = 0;
  bool have_corrections = false, have_calibrations = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      pc.errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto bad = [&](const std::string& why) {
      pc.errors.push_back("line " + std::to_string(lineno) + " (" + key + "): " + why);
    };

    if (key == "experiment") {
      if (value == "typeI-h00") cfg.experiment = Experiment::TypeIH00;
      else if (value == "typeI-hk") cfg.experiment = Experiment::TypeIHk;
      else if (value == "typeI-tprime") cfg.experiment = Experiment::TypeITPrime;
      else if (value == "selection") cfg.experiment = Experiment::Selection;
      else if (value == "histogram") cfg.experiment = Experiment::Histogram;
      else bad("unknown experiment '" + value + "'");
    } else if (key == "N") {
      for (const auto& t : tokenize(value)) {
        try { cfg.n_list.push_back(std::stoi(t)); }
        catch (...) { bad("'" + t + "' is not an integer"); }
      }
    } else if (key == "p") {
      for (const auto& t : tokenize(value)) {
        try { cfg.p_list.push_back(std::stoi(t)); }
        catch (...) { bad("'" + t + "' is not an integer"); }
      }
    } else if (key == "epsilon") {
      // either a comma list of fractions or a range lo/den .. hi/den
      const auto dots = value.find("..");
      if (dots != std::string::npos) {
        Rational lo, hi;
        if (!parse_fraction(trim(value.substr(0, dots)), lo) ||
            !parse_fraction(trim(value.substr(dots + 2)), hi))
          bad("range endpoints must be fractions like 3/24");
        else if (lo.den != hi.den)
          bad("range endpoints must share a denominator");
        else
          for (int n = lo.num; n <= hi.num; ++n) cfg.epsilon_list.push_back({n, lo.den});
      } else {
        for (const auto& t : tokenize(value)) {
          Rational r;
          if (parse_fraction(t, r)) cfg.epsilon_list.push_back(r);
          else bad("'" + t + "' is not a fraction like 8/24");
        }
      }
    } else if (key == "generator") {
      const auto paren = value.find('(');
      const std::string name = paren == std::string::npos ? value : value.substr(0, paren);
      std::string arg;
      if (paren != std::string::npos) {
        const auto close = value.find(')', paren);
        if (close == std::string::npos) { bad("missing ')'"); continue; }
        arg = trim(value.substr(paren + 1, close - paren - 1));
      }
      if (name == "iid-normal") cfg.generator.kind = GeneratorKind::IidNormal;
      else if (name == "factor-normal") {
        cfg.generator.kind = GeneratorKind::FactorNormal;
        if (arg.rfind("k0=", 0) == 0) arg = arg.substr(3);
        try { cfg.generator.k0 = std::stoi(arg); }
        catch (...) { bad("factor-normal needs k0, e.g. factor-normal(k0=1)"); }
      } else if (name == "iid-t") {
        cfg.generator.kind = GeneratorKind::IidT;
        if (arg.rfind("df=", 0) == 0) arg = arg.substr(3);
        try { cfg.generator.t_df = std::stoi(arg); }
        catch (...) { bad("iid-t needs degrees of freedom, e.g. iid-t(5)"); }
      } else if (name == "discretized") {
        cfg.generator.kind = GeneratorKind::Discretized;
        if (arg == "I") cfg.generator.setting = DiscretizeSetting::I;
        else if (arg == "II") cfg.generator.setting = DiscretizeSetting::II;
        else if (arg == "III") cfg.generator.setting = DiscretizeSetting::III;
        else bad("discretized setting must be I, II or III");
      } else bad("unknown generator '" + name + "'");
    } else if (key == "replications") {
      try { cfg.replications = std::stoi(value); }
      catch (...) { bad("not an integer"); }
    } else if (key == "alpha") {
      double a;
      if (parse_double(value, a)) cfg.alpha = a;
      else bad("not a number");
    } else if (key == "correction") {
      have_corrections = true;
      for (const auto& t : tokenize(value)) {
        if (t == "none") cfg.corrections.push_back(Correction::None);
        else if (t == "bartlett") cfg.corrections.push_back(Correction::Bartlett);
        else bad("'" + t + "' is not none|bartlett");
      }
    } else if (key == "calibration") {
      have_calibrations = true;
      for (const auto& t : tokenize(value)) {
        if (t == "chisq") cfg.calibrations.push_back(Calibration::ChiSq);
        else if (t == "hd-normal") cfg.calibrations.push_back(Calibration::HdNormal);
        else bad("'" + t + "' is not chisq|hd-normal");
      }
    } else if (key == "seed") {
      try { cfg.seed = std::stoull(value); }
      catch (...) { bad("not an unsigned integer"); }
    } else if (key == "k") {
      try { cfg.k = std::stoi(value); }
      catch (...) { bad("not an integer"); }
    } else if (key == "k_max") {
      try { cfg.k_max = std::stoi(value); }
      catch (...) { bad("not an integer"); }
    } else {
      bad("unknown key");
    }
  }
  if (!have_corrections) cfg.corrections = {Correction::None, Correction::Bartlett};
  if (!have_calibrations) cfg.calibrations = {Calibration::ChiSq};
  for (const auto& e : cfg.validate()) pc.errors.push_back(e);
  return pc;
}

inline ParsedConfig parse_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParsedConfig pc;
    pc.errors.push_back("cannot open '" + path + "'");
    return pc;
  }
  return parse_sim_config_text(in);
}

// ---------------------------------------------------------------------------
// Report formatting (deterministic: no timestamps, fixed float formats).

inline std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string format_regime(const RegimeReport& r) {
  std::ostringstream os;
  os << "regime diagnostic (N=" << r.n_obs << ", p=" << r.p << ")\n";
  os << "  epsilon = ln p / ln N = " << fmt(r.epsilon) << "\n";
  os << "  p^2 / N   = " << fmt(r.ratio_sq) << "  -> chisq calibration: "
     << to_string(r.chisq_valid) << "\n";
  os << "  p^3 / N^2 = " << fmt(r.ratio_cube) << "  -> bartlett calibration: "
     << to_string(r.bartlett_valid) << "\n";
  os << "  (thresholds: safe < " << fmt(r.thresholds.safe_below) << ", failing >= "
     << fmt(r.thresholds.failing_at) << ")\n";
  return os.str();
}

inline std::string format_test_report(const std::string& kind, const TestResult& r, int n_obs,
                                      int p, double alpha) {
  std::ostringstream os;
  os << "likelihood ratio test: " << kind << "\n";
  os << "  N = " << n_obs << ", p = " << p << "\n";
  os << "  statistic           T = " << fmt(r.statistic, "%.10g") << "\n";
  os << "  bartlett factor   rho = " << fmt(r.rho, "%.10g") << "\n";
  os << "  corrected     rho * T = " << fmt(r.corrected_statistic, "%.10g") << "\n";
  os << "  correction            = " << to_string(r.correction) << "\n";
  os << "  calibration           = " << to_string(r.calibration) << "\n";
  if (r.calibration == Calibration::ChiSq) {
    os << "  df                    = " << fmt(r.df, "%.10g") << "\n";
  } else if (r.hd) {
    os << "  normal limit       mu = " << fmt(r.hd->mu, "%.10g") << "\n";
    os << "  normal limit    sigma = " << fmt(r.hd->sigma, "%.10g") << "\n";
    os << "  standardized        z = "
       << fmt((r.statistic + r.hd->n * r.hd->mu) / (r.hd->n * r.hd->sigma), "%.10g") << "\n";
  }
  os << "  p-value               = " << fmt(r.p_value, "%.10g") << "\n";
  os << "  decision at alpha=" << fmt(alpha) << ": "
     << (r.rejected(alpha) ? "reject" : "fail to reject") << "\n";
  os << format_regime(r.regime);
  if (!r.warnings.empty()) {
    os << "warnings:\n";
    for (const auto& w : r.warnings) os << "  ! " << w << "\n";
  }
  return os.str();
}

struct ExitCode {
  static constexpr int Ok = 0;
  static constexpr int Failure = 1;
  static constexpr int FatalWarning = 2;
};

/// Builds the CLI and runs it; `out` and `err` receive everything the user
/// sees, so tests can run commands in-process.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"likelihood ratio tests for exploratory factor analysis, with "
               "high-dimensional regime diagnostics"};
  app.require_subcommand(1);

  // --- test ---------------------------------------------------------------
  auto* t = app.add_subcommand("test", "run one likelihood ratio test on a data file");
  std::string t_kind, t_input, t_sigma, t_correction = "none", t_calibration = "chisq";
  int t_k = 1;
  double t_alpha = 0.05;
  bool t_strict = false;
  t->add_option("--kind", t_kind, "no-factor | k-factor | given-sigma")->required();
  t->add_option("--k", t_k, "number of factors under the null (k-factor)");
  t->add_option("--sigma", t_sigma, "file with the null covariance matrix (given-sigma)");
  t->add_option("--correction", t_correction, "none | bartlett")->capture_default_str();
  t->add_option("--calibration", t_calibration, "chisq | hd-normal")->capture_default_str();
  t->add_option("--alpha", t_alpha, "significance level")->capture_default_str();
  t->add_flag("--strict", t_strict, "exit 2 when a validity warning fires");
  t->add_option("input", t_input, "delimited data file, rows = observations")->required();

  // --- select ---------------------------------------------------------------
  auto* sel = app.add_subcommand("select", "sequential factor-number selection");
  std::string s_input, s_correction = "bartlett";
  double s_alpha = 0.05;
  int s_kmax = -1;
  bool s_strict = false;
  sel->add_option("--alpha", s_alpha, "significance level")->capture_default_str();
  sel->add_option("--correction", s_correction, "none | bartlett")->capture_default_str();
  sel->add_option("--k-max", s_kmax, "largest k to try (default: df bound)");
  sel->add_flag("--strict", s_strict, "exit 2 when a validity warning fires");
  sel->add_option("input", s_input, "delimited data file")->required();

  // --- diagnose -------------------------------------------------------------
  auto* diag = app.add_subcommand("diagnose", "phase-transition regime report for (N, p)");
  int d_n = 0, d_p = 0;
  diag->add_option("-N,--N", d_n, "sample size")->required();
  diag->add_option("-p,--p", d_p, "data dimension")->required();

  // --- simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment from a config file");
  std::string m_config, m_out = "results";
  int m_threads = 0;
  std::optional<std::uint64_t> m_seed;
  sim->add_option("config", m_config, "flat key = value config file")->required();
  sim->add_option("--out", m_out, "output prefix (<out>.csv and <out>.txt)")
      ->capture_default_str();
  sim->add_option("--threads", m_threads, "worker threads (0 = all cores)");
  sim->add_option("--seed", m_seed, "override the config seed");

  try {
    std::vector<const char*> argv;
    argv.push_back("hdfa");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help() << "\n";
      return ExitCode::Ok;
    }
    err << "error: " << e.what() << "\n";
    return ExitCode::Failure;
  }

  auto parse_correction = [&](const std::string& s) {
    if (s == "none") return Correction::None;
    if (s == "bartlett") return Correction::Bartlett;
    throw InvalidInput("correction must be none|bartlett, got '" + s + "'");
  };
  auto parse_calibration = [&](const std::string& s) {
    if (s == "chisq") return Calibration::ChiSq;
    if (s == "hd-normal") return Calibration::HdNormal;
    throw InvalidInput("calibration must be chisq|hd-normal, got '" + s + "'");
  };

  try {
    if (app.got_subcommand(t)) {
      const DataMatrix data = read_data_matrix(t_input);
      const Correction corr = parse_correction(t_correction);
      const Calibration cal = parse_calibration(t_calibration);
      TestResult r;
      std::string kind_desc;
      if (t_kind == "no-factor") {
        r = test_no_factor(data, corr, cal);
        kind_desc = "no-factor (H_00: identity correlation)";
      } else if (t_kind == "k-factor") {
        r = test_k_factor(data, t_k, corr, {}, {}, cal);
        kind_desc = "k-factor (H_0," + std::to_string(t_k) + ")";
      } else if (t_kind == "given-sigma") {
        if (t_sigma.empty()) throw InvalidInput("given-sigma requires --sigma FILE");
        r = test_given_sigma(data, read_square_matrix(t_sigma), corr, cal);
        kind_desc = "given-sigma (H': Sigma = Sigma_0)";
      } else {
        throw InvalidInput("unknown --kind '" + t_kind + "'");
      }
      out << format_test_report(kind_desc, r, data.n(), data.p(), t_alpha);
      if (t_strict && !r.warnings.empty()) {
        err << "strict mode: a statistical-validity warning fired\n";
        return ExitCode::FatalWarning;
      }
      return ExitCode::Ok;
    }

    if (app.got_subcommand(sel)) {
      const DataMatrix data = read_data_matrix(s_input);
      const SelectionResult res =
          select_num_factors(data, s_alpha, parse_correction(s_correction), s_kmax);
      out << "sequential likelihood ratio selection (alpha = " << fmt(res.alpha)
          << ", correction = " << s_correction << ")\n";
      out << "  k_hat = " << res.k_hat << "  (stopped: " << to_string(res.stopped_reason)
          << ")\n";
      out << "  trail:\n";
      out << "    k   statistic        df        p-value      decision\n";
      for (const auto& e : res.trail) {
        const double used = e.result.correction == Correction::Bartlett
                                ? e.result.corrected_statistic
                                : e.result.statistic;
        char line[160];
        std::snprintf(line, sizeof(line), "    %-3d %-16.8g %-9.6g %-12.6g %s\n", e.k, used,
                      e.result.df, e.result.p_value, e.rejected ? "reject" : "fail to reject");
        out << line;
      }
      bool warned = false;
      for (const auto& e : res.trail) warned = warned || !e.result.warnings.empty();
      if (!res.trail.empty()) {
        out << format_regime(res.trail.front().result.regime);
        for (const auto& e : res.trail)
          for (const auto& w : e.result.warnings) out << "  ! k=" << e.k << ": " << w << "\n";
      }
      if (s_strict && warned) {
        err << "strict mode: a statistical-validity warning fired\n";
        return ExitCode::FatalWarning;
      }
      return ExitCode::Ok;
    }

    if (app.got_subcommand(diag)) {
      const RegimeReport r = regime_diagnostic(d_n, d_p);
      out << format_regime(r);
      const double thr = r.thresholds.safe_below;
      const long n_chisq = static_cast<long>(std::ceil(static_cast<double>(d_p) * d_p / thr));
      const long n_bart = static_cast<long>(
          std::ceil(std::sqrt(static_cast<double>(d_p) * d_p * d_p / thr)));
      out << "minimum N for a safe verdict at p = " << d_p << ":\n";
      out << "  chisq calibration    (p^2/N < " << fmt(thr) << "):   N >= " << n_chisq << "\n";
      out << "  bartlett calibration (p^3/N^2 < " << fmt(thr) << "): N >= " << n_bart << "\n";
      return ExitCode::Ok;
    }

    if (app.got_subcommand(sim)) {
      ParsedConfig pc = parse_sim_config(m_config);
      if (!pc.errors.empty()) {
        err << "config errors in '" << m_config << "':\n";
        for (const auto& e : pc.errors) err << "  - " << e << "\n";
        return ExitCode::Failure;
      }
      if (m_seed) pc.config.seed = *m_seed;
      const SimGridResult res = run_experiment(pc.config, m_threads,
                                               [&](const std::string& msg) { err << msg << "\n"; });
      std::ofstream csv(m_out + ".csv");
      std::ofstream txt(m_out + ".txt");
      if (!csv || !txt) throw InvalidInput("cannot write output files with prefix '" + m_out + "'");
      csv << res.to_csv();
      txt << res.to_text();
      out << "wrote " << m_out << ".csv and " << m_out << ".txt (" << res.rows.size()
          << " rows)\n";
      return ExitCode::Ok;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::Failure;
  }
  err << "error: no subcommand\n";
  return ExitCode::Failure;
}

}  // namespace hdfa::cli

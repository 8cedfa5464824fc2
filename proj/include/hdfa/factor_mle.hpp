#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hdfa/core_stats.hpp"
#include "hdfa/sampler.hpp"

namespace hdfa {

/// Degrees of freedom of the k-factor test, f_k = ((p-k)^2 - p - k)/2.
/// Always an integer: (p-k)^2 and p+k have the same parity.
inline long factor_test_df(int p, int k) {
  const long d = static_cast<long>(p) - k;
  return (d * d - p - k) / 2;
}

struct SolverOptions {
  int max_iterations = 500;
  double grad_tol_per_p = 1e-8;     // converge when ||pg||_inf <= grad_tol_per_p * p
  double rel_obj_tol = 1e-12;       // or when the relative objective change is below this
  double uniqueness_floor = 0.005;  // psi_j >= uniqueness_floor * S_jj (Heywood guard)
  double init_fraction = 0.5;       // psi_j^(0) = init_fraction * S_jj
  bool record_trace = false;
};

/// Result of a maximum-likelihood factor fit.
///
/// `discrepancy` is the profile value of
///   F = log|Sigma_k| - log|S| + tr(S Sigma_k^{-1}) - p  >= 0,
/// so the k-factor LRT statistic is (N-1) * F.
struct MleFit {
  FactorModel model;
  int k = 0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  double discrepancy = 0.0;
  bool at_floor = false;                // some uniqueness ended on the Heywood floor
  std::vector<double> objective_trace;  // filled when SolverOptions::record_trace
};

namespace detail {

// Profile objective at fixed uniquenesses: with theta the eigenvalues of
// Psi^{-1/2} S Psi^{-1/2} in decreasing order,
//   F(psi) = sum_{j>k} (theta_j - log theta_j - 1),
// attained by Lawley's conditional maximizer over the loadings.
struct ProfileObjective {
  const Matrix& s;
  int k;

  Matrix scaled(const Vector& psi) const {
    Vector inv_sqrt = psi.array().rsqrt();
    return inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
  }

  double value(const Vector& psi) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(scaled(psi), Eigen::EigenvaluesOnly);
    return tail_sum(es.eigenvalues());
  }

  // Objective and gradient wrt x = log(psi):
  //   dF/dx_j = sum_{i in top-k} (theta_i - 1)_+ E_ji^2 + 1 - S_jj / psi_j.
  double value_grad(const Vector& psi, Vector& grad, Eigen::SelfAdjointEigenSolver<Matrix>& es)
      const {
    es.compute(scaled(psi));
    const int p = static_cast<int>(psi.size());
    grad.resize(p);
    for (int j = 0; j < p; ++j) {
      double acc = 0.0;
      for (int i = p - k; i < p; ++i) {  // Eigen sorts ascending; top-k are last
        const double excess = std::max(es.eigenvalues()(i) - 1.0, 0.0);
        const double e = es.eigenvectors()(j, i);
        acc += excess * e * e;
      }
      grad(j) = acc + 1.0 - s(j, j) / psi(j);
    }
    return tail_sum(es.eigenvalues());
  }

  double tail_sum(const Vector& eigenvalues) const {
    const int p = static_cast<int>(eigenvalues.size());
    double f = 0.0;
    for (int j = 0; j < p - k; ++j) {
      const double t = eigenvalues(j);
      if (!(t > 0.0))
        throw NotPositiveDefinite("fit_factor_model: scaled covariance not PD", j, t);
      f += t - std::log(t) - 1.0;
    }
    return f;
  }
};

// Loadings from the final eigen step, in the canonical orientation:
// Lambda^T Psi^{-1} Lambda diagonal with decreasing entries, first
// nonnegligible entry of each column positive.
inline Matrix extract_loadings(const Vector& psi, const Eigen::SelfAdjointEigenSolver<Matrix>& es,
                               int k) {
  const int p = static_cast<int>(psi.size());
  Matrix lambda = Matrix::Zero(p, k);
  for (int c = 0; c < k; ++c) {
    const int i = p - 1 - c;  // descending eigenvalues
    const double excess = std::max(es.eigenvalues()(i) - 1.0, 0.0);
    if (excess == 0.0) continue;
    lambda.col(c) = psi.array().sqrt() * es.eigenvectors().col(i).array() * std::sqrt(excess);
    const double scale = lambda.col(c).cwiseAbs().maxCoeff();
    for (int j = 0; j < p; ++j) {
      if (std::fabs(lambda(j, c)) > 1e-12 * scale) {
        if (lambda(j, c) < 0.0) lambda.col(c) = -lambda.col(c);
        break;
      }
    }
  }
  return lambda;
}

}  // namespace detail

/// ML estimation of the k-factor model from a sample covariance matrix.
///
/// Profile likelihood over log-uniquenesses with analytic gradient and a
/// BFGS outer loop; the conditional loading problem is solved exactly by the
/// eigen step at every evaluation.  Uniquenesses are kept above
/// `uniqueness_floor * S_jj`; fits that end on the floor are flagged, not
/// hidden.  k=0 needs no optimization: Sigma_0 = diag(S).
inline MleFit fit_factor_model(const CovMatrix& s_in, int k, SolverOptions opts = {}) {
  const Matrix& s = s_in.values;
  const int p = s_in.p();
  if (k < 0) throw InvalidInput("fit_factor_model: k must be >= 0");
  if (factor_test_df(p, k) < 0)
    throw InvalidInput("fit_factor_model: k=" + std::to_string(k) +
                       " over-parameterizes p=" + std::to_string(p) +
                       " (negative test degrees of freedom)");
  SpdFactor::compute(s);  // reject non-PD input up front

  if (k == 0) {
    MleFit fit{FactorModel(Matrix::Zero(p, 0), s.diagonal()), 0, true, 0, 0.0, 0.0, false, {}};
    detail::ProfileObjective obj{s, 0};
    fit.discrepancy = obj.value(s.diagonal());
    if (opts.record_trace) fit.objective_trace.push_back(fit.discrepancy);
    return fit;
  }

  detail::ProfileObjective obj{s, k};
  const Vector floor = opts.uniqueness_floor * s.diagonal();
  const Vector lb = floor.array().log();
  Vector x = (opts.init_fraction * s.diagonal()).array().log();
  x = x.cwiseMax(lb);

  Eigen::SelfAdjointEigenSolver<Matrix> es;
  Vector grad(p);
  double f = obj.value_grad(x.array().exp(), grad, es);

  MleFit fit{FactorModel(Matrix::Zero(p, 1), Vector::Ones(p)), k, false, 0, 0.0, 0.0, false, {}};
  if (opts.record_trace) fit.objective_trace.push_back(f);

  auto projected_grad_norm = [&](const Vector& xx, const Vector& g) {
    double nrm = 0.0;
    for (int j = 0; j < p; ++j) {
      const bool active = xx(j) <= lb(j) + 1e-12;
      const double pg = active ? std::min(g(j), 0.0) : g(j);
      nrm = std::max(nrm, std::fabs(pg));
    }
    return nrm;
  };

  Matrix h = Matrix::Identity(p, p);  // inverse Hessian approximation
  const double grad_tol = opts.grad_tol_per_p * p;
  bool first_update = true;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    fit.grad_norm = projected_grad_norm(x, grad);
    if (fit.grad_norm <= grad_tol) {
      fit.converged = true;
      break;
    }

    Vector dir = -(h.selfadjointView<Eigen::Lower>() * grad);
    if (grad.dot(dir) >= 0.0) {  // not a descent direction; restart
      h.setIdentity();
      dir = -grad;
      first_update = true;
    }

    // Backtracking Armijo search along the projected arc.
    double step = 1.0;
    Vector x_new, psi_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = (x + step * dir).cwiseMax(lb);
      const Vector dx = x_new - x;
      if (dx.cwiseAbs().maxCoeff() == 0.0) break;
      psi_new = x_new.array().exp();
      f_new = obj.value(psi_new);
      const double slope = grad.dot(dx);
      if (slope < 0.0 && f_new <= f + 1e-4 * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; report best iterate with converged=false

    Vector grad_new(p);
    const double f_check = obj.value_grad(psi_new, grad_new, es);
    const bool bound_hit = ((x_new.array() <= lb.array() + 1e-12) !=
                            (x.array() <= lb.array() + 1e-12)).any();
    const Vector step_vec = x_new - x;
    const Vector y = grad_new - grad;
    const double sy = step_vec.dot(y);
    if (bound_hit) {
      h.setIdentity();
      first_update = true;
    } else if (sy > 1e-12 * step_vec.norm() * y.norm()) {
      if (first_update) {
        h.setIdentity();
        h *= sy / y.squaredNorm();
        first_update = false;
      }
      const Vector hy = h.selfadjointView<Eigen::Lower>() * y;
      const double yhy = y.dot(hy);
      const double rho = 1.0 / sy;
      // BFGS inverse update (kept explicitly symmetric).
      h -= rho * (hy * step_vec.transpose() + step_vec * hy.transpose());
      h += (rho * rho * yhy + rho) * (step_vec * step_vec.transpose());
      h = 0.5 * (h + h.transpose()).eval();
    }

    const double prev_f = f;
    x = x_new;
    grad = grad_new;
    f = f_check;
    if (opts.record_trace) fit.objective_trace.push_back(f);
    if (std::fabs(prev_f - f) <= opts.rel_obj_tol * std::max(1.0, std::fabs(f))) {
      fit.grad_norm = projected_grad_norm(x, grad);
      fit.converged = true;
      ++it;
      break;
    }
  }

  const Vector psi = x.array().exp();
  fit.iterations = it;
  fit.grad_norm = projected_grad_norm(x, grad);
  if (!fit.converged && fit.grad_norm <= grad_tol) fit.converged = true;
  fit.discrepancy = obj.value_grad(psi, grad, es);
  fit.at_floor = (x.array() <= lb.array() + 1e-12).any();
  fit.model = FactorModel(detail::extract_loadings(psi, es, k), psi);
  return fit;
}

}  // namespace hdfa

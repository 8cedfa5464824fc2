#pragma once

#include <string>
#include <vector>

#include "hdfa/lrt.hpp"

namespace hdfa {

enum class StopReason { NonRejection, DfExhausted, MleFailure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::NonRejection: return "non-rejection";
    case StopReason::DfExhausted: return "df-exhausted";
    default: return "mle-failure";
  }
}

struct TrailEntry {
  int k;
  TestResult result;
  bool rejected;
};

/// Outcome of the forward stepwise factor-number search.
struct SelectionResult {
  int k_hat = 0;
  std::vector<TrailEntry> trail;
  StopReason stopped_reason = StopReason::NonRejection;
  double alpha = 0.05;
};

/// Largest k whose test still has positive degrees of freedom.
inline int max_testable_k(int p) {
  int k = 0;
  while (factor_test_df(p, k + 1) >= 1) ++k;
  return k;
}

/// Forward stepwise selection: test H_{0,0}, H_{0,1}, ... at a fixed level
/// until the first non-rejection; k_hat is that index.  The same alpha is
/// used at every step (no multiplicity adjustment).  MLE non-convergence
/// stops the search rather than silently skipping a k.
inline SelectionResult select_num_factors(const DataMatrix& data, double alpha,
                                          Correction correction, int k_max = -1,
                                          SolverOptions opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInput("select_num_factors: alpha must be in (0,1)");
  const int p = data.p();
  const int k_cap = max_testable_k(p);
  if (k_max < 0 || k_max > k_cap) k_max = k_cap;

  SelectionResult sel;
  sel.alpha = alpha;
  for (int k = 0; k <= k_max; ++k) {
    TestResult r = k == 0 ? test_no_factor(data, correction)
                          : test_k_factor(data, k, correction, opts);
    const bool rejected = r.rejected(alpha);
    const bool mle_ok = r.mle_converged;
    sel.trail.push_back({k, std::move(r), rejected});
    if (!mle_ok) {
      sel.k_hat = k;
      sel.stopped_reason = StopReason::MleFailure;
      return sel;
    }
    if (!rejected) {
      sel.k_hat = k;
      sel.stopped_reason = StopReason::NonRejection;
      return sel;
    }
  }
  sel.k_hat = k_max;
  sel.stopped_reason = StopReason::DfExhausted;
  return sel;
}

}  // namespace hdfa

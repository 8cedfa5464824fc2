#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "hdfa/core_stats.hpp"
#include "hdfa/rng.hpp"

namespace hdfa {

/// Factor model: loadings (p x k), strictly positive uniquenesses, mean.
/// The implied covariance is Lambda Lambda^T + diag(psi).
struct FactorModel {
  Matrix loadings;       // p x k
  Vector uniquenesses;   // p, all > 0
  Vector mean;           // p, defaults to zero

  FactorModel(Matrix lambda, Vector psi)
      : FactorModel(std::move(lambda), std::move(psi), Vector()) {}

  FactorModel(Matrix lambda, Vector psi, Vector mu)
      : loadings(std::move(lambda)), uniquenesses(std::move(psi)), mean(std::move(mu)) {
    const int pp = static_cast<int>(loadings.rows());
    if (uniquenesses.size() != pp)
      throw ShapeMismatch("FactorModel: uniquenesses size " +
                          std::to_string(uniquenesses.size()) + " vs p=" + std::to_string(pp));
    if (loadings.cols() >= pp)
      throw InvalidInput("FactorModel: k must be < p, got k=" +
                         std::to_string(loadings.cols()) + ", p=" + std::to_string(pp));
    if ((uniquenesses.array() <= 0.0).any())
      throw InvalidInput("FactorModel: uniquenesses must be strictly positive");
    if (mean.size() == 0) mean = Vector::Zero(pp);
    if (mean.size() != pp) throw ShapeMismatch("FactorModel: mean size vs p mismatch");
  }

  int p() const { return static_cast<int>(loadings.rows()); }
  int k() const { return static_cast<int>(loadings.cols()); }

  Matrix implied_sigma() const {
    Matrix s = loadings * loadings.transpose();
    s.diagonal() += uniquenesses;
    s = 0.5 * (s + s.transpose()).eval();
    return s;
  }
};

enum class GeneratorKind { FactorNormal, IidNormal, IidT, Discretized };

/// Appendix-style discretization settings mapping a N(0,1) draw z to a
/// small integer level.
enum class DiscretizeSetting { I, II, III };

inline double discretize(DiscretizeSetting s, double z) {
  switch (s) {
    case DiscretizeSetting::I:
      return z < 0.0 ? -1.0 : 1.0;
    case DiscretizeSetting::II:
      if (z < -1.0) return -2.0;
      if (z < 0.0) return -1.0;
      if (z < 1.0) return 1.0;
      return 2.0;
    case DiscretizeSetting::III:
      if (z < -1.0) return -3.0;
      if (z < -0.4) return -2.0;
      if (z < 0.0) return -1.0;
      if (z < 0.4) return 1.0;
      if (z < 1.0) return 2.0;
      return 3.0;
  }
  throw InvalidInput("discretize: unknown setting");
}

/// Reproducible generator description: what to draw and from which stream.
/// (seed, stream) fully determines the output matrix.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::IidNormal;
  std::optional<FactorModel> model;  // required for FactorNormal
  int t_df = 5;                      // for IidT
  DiscretizeSetting setting = DiscretizeSetting::I;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  static GeneratorSpec iid_normal(std::uint64_t seed, std::uint64_t stream = 0) {
    GeneratorSpec s;
    s.kind = GeneratorKind::IidNormal;
    s.seed = seed;
    s.stream = stream;
    return s;
  }
  static GeneratorSpec factor_normal(FactorModel m, std::uint64_t seed,
                                     std::uint64_t stream = 0) {
    GeneratorSpec s;
    s.kind = GeneratorKind::FactorNormal;
    s.model = std::move(m);
    s.seed = seed;
    s.stream = stream;
    return s;
  }
  static GeneratorSpec iid_t(int df, std::uint64_t seed, std::uint64_t stream = 0) {
    if (df < 1) throw InvalidInput("GeneratorSpec: t degrees of freedom must be >= 1");
    GeneratorSpec s;
    s.kind = GeneratorKind::IidT;
    s.t_df = df;
    s.seed = seed;
    s.stream = stream;
    return s;
  }
  static GeneratorSpec discretized(DiscretizeSetting setting, std::uint64_t seed,
                                   std::uint64_t stream = 0) {
    GeneratorSpec s;
    s.kind = GeneratorKind::Discretized;
    s.setting = setting;
    s.seed = seed;
    s.stream = stream;
    return s;
  }
};

/// Draws N i.i.d. rows.  Factor-normal rows are mu + L z with L the Cholesky
/// factor of the implied covariance; t entries are Z / sqrt(V/df); discretized
/// entries threshold a standard normal draw.  Entries are generated row by
/// row, so the output is a pure function of (spec, N, p).
inline DataMatrix sample(const GeneratorSpec& spec, int n, int p) {
  if (n < 2 || p < 1)
    throw InvalidInput("sample: need N >= 2 and p >= 1, got N=" + std::to_string(n) +
                       ", p=" + std::to_string(p));
  RngStream rng(spec.seed, spec.stream);
  Matrix x(n, p);
  switch (spec.kind) {
    case GeneratorKind::IidNormal:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
      break;
    case GeneratorKind::IidT:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
          const double z = rng.normal();
          x(i, j) = z / std::sqrt(rng.chisq(spec.t_df) / spec.t_df);
        }
      break;
    case GeneratorKind::Discretized:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = discretize(spec.setting, rng.normal());
      break;
    case GeneratorKind::FactorNormal: {
      if (!spec.model) throw InvalidInput("sample: factor-normal spec has no model");
      const FactorModel& m = *spec.model;
      if (m.p() != p)
        throw ShapeMismatch("sample: model has p=" + std::to_string(m.p()) +
                            ", requested p=" + std::to_string(p));
      const Matrix l = SpdFactor::compute(m.implied_sigma()).matrix_l();
      Vector z(p);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) z(j) = rng.normal();
        x.row(i) = (m.mean + l.triangularView<Eigen::Lower>() * z).transpose();
      }
      break;
    }
  }
  return DataMatrix(std::move(x));
}

/// The two loading structures used by the simulation studies.
/// k0=1: Lambda = 0.3 * 1_p, Psi = 0.91 I.
/// k0=3: block-diagonal loadings of value 0.6 with block heights
///       p1, p1, p-2*p1 (p1 = floor(p/3)), Psi = 0.64 I.
inline FactorModel build_example_model(int k0, int p) {
  if (k0 == 1) {
    if (p < 2) throw InvalidInput("build_example_model: k0=1 needs p >= 2");
    const double rho = 0.3;
    Matrix lambda = Matrix::Constant(p, 1, rho);
    Vector psi = Vector::Constant(p, 1.0 - rho * rho);
    return FactorModel(std::move(lambda), std::move(psi));
  }
  if (k0 == 3) {
    // p=3 would give k = p, which the model type rejects; the smallest
    // usable dimension is 4.
    if (p < 4) throw InvalidInput("build_example_model: k0=3 needs p >= 4");
    const double rho = 0.6;
    const int p1 = p / 3;
    Matrix lambda = Matrix::Zero(p, 3);
    lambda.block(0, 0, p1, 1).setConstant(rho);
    lambda.block(p1, 1, p1, 1).setConstant(rho);
    lambda.block(2 * p1, 2, p - 2 * p1, 1).setConstant(rho);
    Vector psi = Vector::Constant(p, 1.0 - rho * rho);
    return FactorModel(std::move(lambda), std::move(psi));
  }
  throw InvalidInput("build_example_model: k0 must be 1 or 3, got " + std::to_string(k0));
}

}  // namespace hdfa

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>

#include "hdfa/errors.hpp"

namespace hdfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline void check_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw ShapeMismatch(std::string(what) + ": matrix is " + std::to_string(m.rows()) +
                        "x" + std::to_string(m.cols()) + ", expected square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw InvalidInput(std::string(what) + ": matrix is not symmetric (max asymmetry " +
                       std::to_string(asym) + ")");
}

}  // namespace detail

/// N x p observation matrix, rows are observations.
struct DataMatrix {
  Matrix values;

  explicit DataMatrix(Matrix v) : values(std::move(v)) {
    if (values.rows() < 2)
      throw InvalidInput("DataMatrix: need at least 2 observations, got " +
                         std::to_string(values.rows()));
    if (values.cols() < 1) throw InvalidInput("DataMatrix: need at least 1 variable");
    if (!values.allFinite()) throw InvalidInput("DataMatrix: non-finite entries");
  }

  int n() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }
};

/// Unbiased sample covariance together with its divisor n = N-1.
struct CovMatrix {
  Matrix values;
  int dof;  // divisor N-1

  CovMatrix(Matrix v, int dof) : values(std::move(v)), dof(dof) {
    detail::check_symmetric(values, "CovMatrix");
    if (dof < 1) throw InvalidInput("CovMatrix: dof must be >= 1");
  }

  int p() const { return static_cast<int>(values.rows()); }
};

/// Sample correlation matrix; unit diagonal by construction.
struct CorrMatrix {
  Matrix values;

  explicit CorrMatrix(Matrix v) : values(std::move(v)) {
    detail::check_symmetric(values, "CorrMatrix");
  }

  int p() const { return static_cast<int>(values.rows()); }
};

/// Lower Cholesky factor of an SPD matrix.
///
/// A pivot <= 1e-12 * max(diagonal) counts as failure, so numerically
/// singular matrices (N close to p) are rejected rather than factored
/// into garbage.
class SpdFactor {
 public:
  static SpdFactor compute(const Matrix& m) {
    detail::check_symmetric(m, "SpdFactor");
    const int p = static_cast<int>(m.rows());
    const double max_diag = m.diagonal().maxCoeff();
    const double pivot_tol = 1e-12 * max_diag;
    if (max_diag <= 0.0) throw NotPositiveDefinite("SpdFactor: nonpositive diagonal", 0, max_diag);

    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
      SpdFactor f;
      f.l_ = llt.matrixL();
      for (int j = 0; j < p; ++j) {
        const double pivot = f.l_(j, j) * f.l_(j, j);
        if (!(pivot > pivot_tol))
          throw NotPositiveDefinite("SpdFactor: pivot " + std::to_string(j) +
                                        " below tolerance (" + std::to_string(pivot) + ")",
                                    j, pivot);
      }
      return f;
    }
    // Eigen rejected the matrix; rerun the textbook loop to locate the pivot.
    Matrix l = Matrix::Zero(p, p);
    for (int j = 0; j < p; ++j) {
      double d = m(j, j) - l.row(j).head(j).squaredNorm();
      if (!(d > pivot_tol))
        throw NotPositiveDefinite(
            "SpdFactor: pivot " + std::to_string(j) + " is " + std::to_string(d), j, d);
      l(j, j) = std::sqrt(d);
      for (int i = j + 1; i < p; ++i)
        l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    SpdFactor f;
    f.l_ = std::move(l);
    return f;
  }

  const Matrix& matrix_l() const { return l_; }
  int dim() const { return static_cast<int>(l_.rows()); }

  double log_det() const {
    double s = 0.0;
    for (int j = 0; j < dim(); ++j) s += std::log(l_(j, j));
    return 2.0 * s;
  }

  /// Solves (L L^T) X = B.
  Matrix solve(Matrix b) const {
    l_.triangularView<Eigen::Lower>().solveInPlace(b);
    l_.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
    return b;
  }

 private:
  Matrix l_;
};

/// Unbiased sample covariance (1/(N-1)) sum (X_i - mean)(X_i - mean)^T.
inline CovMatrix sample_covariance(const DataMatrix& data) {
  const int n = data.n();
  const Matrix centered = data.values.rowwise() - data.values.colwise().mean();
  Matrix s = Matrix(centered.cols(), centered.cols())
                 .setZero()
                 .selfadjointView<Eigen::Lower>()
                 .rankUpdate(centered.transpose(), 1.0 / (n - 1));
  s = s.selfadjointView<Eigen::Lower>();  // mirror to a full symmetric matrix
  return CovMatrix(std::move(s), n - 1);
}

/// D^{-1/2} S D^{-1/2} with D = diag(S); diagonal forced to exactly 1.
inline CorrMatrix sample_correlation(const DataMatrix& data) {
  CovMatrix cov = sample_covariance(data);
  const int p = cov.p();
  Vector d(p);
  for (int j = 0; j < p; ++j) {
    if (!(cov.values(j, j) > 0.0))
      throw DegenerateColumn("sample_correlation: column " + std::to_string(j) +
                                 " has zero sample variance",
                             j);
    d(j) = 1.0 / std::sqrt(cov.values(j, j));
  }
  Matrix r = d.asDiagonal() * cov.values * d.asDiagonal();
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  return CorrMatrix(std::move(r));
}

/// log|m| via Cholesky pivots; avoids determinant overflow at large p.
inline double logdet_spd(const Matrix& m) { return SpdFactor::compute(m).log_det(); }

/// tr(a b^{-1}) via Cholesky solves against b, without forming b^{-1}.
inline double trace_prod_inv(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("trace_prod_inv: shapes " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  SpdFactor f = SpdFactor::compute(b);
  return f.solve(a).trace();
}

inline double trace_prod_inv(const CovMatrix& a, const Matrix& b) {
  return trace_prod_inv(a.values, b);
}

}  // namespace hdfa

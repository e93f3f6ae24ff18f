#include "sublaplace/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sublaplace::linalg {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": matrix is " + std::to_string(m.rows()) +
                    "x" + std::to_string(m.cols()) + ", expected square");
  }
}

bool try_llt(const Matrix& a, Matrix& lower) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

}  // namespace

CholeskyFactor::CholeskyFactor(Matrix lower, double jitter_applied)
    : lower_(std::move(lower)), jitter_(jitter_applied) {}

Matrix CholeskyFactor::reconstruct() const {
  return lower_ * lower_.transpose();
}

CholeskyFactor cholesky(const Matrix& m, double max_jitter) {
  require_square(m, "cholesky");
  if (m.size() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "cholesky: empty matrix");
  }
  if (!all_finite(m)) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "cholesky: matrix has non-finite entries");
  }
  if (!is_symmetric(m)) {
    throw Error(ErrorCode::kInvalidArgument, "cholesky: matrix is not symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());

  Matrix lower;
  if (try_llt(sym, lower)) return CholeskyFactor(std::move(lower), 0.0);

  double mean_diag = sym.diagonal().mean();
  if (!(mean_diag > 0.0)) mean_diag = 1.0;
  double jitter = 1e-10 * mean_diag;
  while (jitter <= max_jitter) {
    Matrix shifted = sym;
    shifted.diagonal().array() += jitter;
    if (try_llt(shifted, lower)) return CholeskyFactor(std::move(lower), jitter);
    jitter *= 10.0;
  }
  throw Error(ErrorCode::kNotPositiveDefinite,
              "cholesky failed with jitter up to " + std::to_string(jitter / 10.0) +
                  " (max_jitter " + std::to_string(max_jitter) + ")");
}

Matrix solve_lower(const CholeskyFactor& f, const Matrix& b) {
  if (b.rows() != f.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "solve: rhs has " + std::to_string(b.rows()) + " rows, factor dim " +
                    std::to_string(f.dim()));
  }
  return f.lower().triangularView<Eigen::Lower>().solve(b);
}

Matrix solve(const CholeskyFactor& f, const Matrix& b) {
  Matrix y = solve_lower(f, b);
  return f.lower().transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector solve(const CholeskyFactor& f, const Vector& b) {
  return solve(f, Matrix(b)).col(0);
}

double quad_form(const CholeskyFactor& f, const Vector& v) {
  return solve_lower(f, Matrix(v)).squaredNorm();
}

Matrix inverse(const CholeskyFactor& f) {
  Matrix inv = solve(f, Matrix(Matrix::Identity(f.dim(), f.dim())));
  return 0.5 * (inv + inv.transpose());
}

Vector inverse_diagonal(const CholeskyFactor& f) {
  const Matrix linv = solve_lower(f, Matrix::Identity(f.dim(), f.dim()));
  return linv.colwise().squaredNorm().transpose();
}

double log_det(const CholeskyFactor& f) {
  return 2.0 * f.lower().diagonal().array().log().sum();
}

Matrix matrix_sqrt_psd(const Matrix& m) {
  require_square(m, "matrix_sqrt_psd");
  if (!is_symmetric(m)) {
    throw Error(ErrorCode::kInvalidArgument,
                "matrix_sqrt_psd: matrix is not symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPsd, "matrix_sqrt_psd: eigendecomposition failed");
  }
  Vector evals = eig.eigenvalues();
  const double scale = sym.norm();
  if (evals.size() > 0 && evals.minCoeff() < -1e-6 * scale) {
    throw Error(ErrorCode::kNotPsd, "matrix_sqrt_psd: eigenvalue " +
                                        std::to_string(evals.minCoeff()) +
                                        " is negative");
  }
  evals = evals.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = eig.eigenvectors();
  Matrix root = v * evals.asDiagonal() * v.transpose();
  return 0.5 * (root + root.transpose());
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Matrix pairwise_sum(std::span<const Matrix> terms) {
  if (terms.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "pairwise_sum: no terms");
  }
  if (terms.size() == 1) return terms.front();
  const std::size_t half = terms.size() / 2;
  Matrix left = pairwise_sum(terms.first(half));
  left += pairwise_sum(terms.subspan(half));
  return left;
}

}  // namespace sublaplace::linalg

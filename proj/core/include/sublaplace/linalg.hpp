#pragma once

#include <span>

#include "sublaplace/common.hpp"

namespace sublaplace::linalg {

inline constexpr double kDefaultMaxJitter = 1e-2;

/// Lower-triangular factor L with L * L^T = A + jitter_applied * I.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(Matrix lower, double jitter_applied);

  const Matrix& lower() const { return lower_; }
  double jitter_applied() const { return jitter_; }
  Index dim() const { return lower_.rows(); }

  /// Reconstructs L * L^T.
  Matrix reconstruct() const;

 private:
  Matrix lower_;
  double jitter_ = 0.0;
};

/// Factors a symmetric positive-definite matrix. The input is symmetrized
/// first and must be symmetric to 1e-8 relative to its largest entry. When
/// the plain factorization fails, a diagonal jitter starting at
/// 1e-10 * mean(diag) is added and escalated by x10 until it succeeds or
/// exceeds max_jitter (NotPositiveDefinite).
CholeskyFactor cholesky(const Matrix& m, double max_jitter = kDefaultMaxJitter);

/// Solves (L L^T) x = b.
Matrix solve(const CholeskyFactor& f, const Matrix& b);
Vector solve(const CholeskyFactor& f, const Vector& b);

/// Solves L y = b (forward substitution only). Columns of the result satisfy
/// ||y||^2 = b^T A^{-1} b.
Matrix solve_lower(const CholeskyFactor& f, const Matrix& b);

/// v^T A^{-1} v for the factored matrix A.
double quad_form(const CholeskyFactor& f, const Vector& v);

/// Explicit A^{-1}.
Matrix inverse(const CholeskyFactor& f);

/// diag(A^{-1}) computed as squared column norms of L^{-1}.
Vector inverse_diagonal(const CholeskyFactor& f);

double log_det(const CholeskyFactor& f);

/// Symmetric square root of a PSD matrix via symmetric eigendecomposition.
/// Eigenvalues down to -1e-6 * ||m||_F are clamped to zero; anything more
/// negative throws NotPsd.
Matrix matrix_sqrt_psd(const Matrix& m);

bool all_finite(const Matrix& m);

/// Symmetry check relative to the largest absolute entry.
bool is_symmetric(const Matrix& m, double rel_tol = 1e-8);

/// Pairwise (tree) summation; deterministic and O(log n) error growth.
double pairwise_sum(std::span<const double> values);

/// Deterministic pairwise reduction of a list of equally-shaped matrices.
Matrix pairwise_sum(std::span<const Matrix> terms);

}  // namespace sublaplace::linalg

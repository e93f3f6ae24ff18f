#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sublaplace/data.hpp"
#include "sublaplace/linalg.hpp"
#include "sublaplace/mask.hpp"
#include "sublaplace/rng.hpp"
#include "sublaplace/train.hpp"

namespace sublaplace {

/// Hessian of the negative log-likelihood with respect to the network
/// outputs: I / sigma^2 for Gaussian regression, diag(p) - p p^T with
/// p = softmax(output) for categorical classification.
Matrix likelihood_hessian(Task task, const Vector& output,
                          std::optional<double> noise_variance = std::nullopt);

/// Per-datapoint Jacobians J_n (over a fixed column set) and H_n J_n, stacked
/// row-wise. Built once at the MAP and reused for every mask and prior
/// precision.
struct JacobianStack {
  Task task = Task::kRegression;
  std::size_t outputs = 1;
  std::size_t points = 0;
  std::vector<std::size_t> columns;
  Matrix jac;       // (points * outputs) x columns
  Matrix hess_jac;  // H_n J_n stacked the same way

  std::size_t dim() const { return columns.size(); }
};

JacobianStack build_jacobian_stack(const MapEstimate& map, const Dataset& data,
                                   std::span<const std::size_t> columns);

enum class GgnKind { kFull, kDiagonal, kSubnetwork };

/// Curvature sum_n J_n^T H_n J_n over `index_map`, kept separate from the
/// isotropic prior term so the prior precision can be swapped cheaply.
struct GgnMatrix {
  GgnKind kind = GgnKind::kFull;
  Matrix data_term;       // dense kinds only
  Vector data_diagonal;   // always populated
  double prior_precision = 1.0;
  std::vector<std::size_t> index_map;
  std::size_t total = 0;  // D of the mask the GGN was built for

  std::size_t dim() const { return index_map.size(); }
  /// data_term + prior_precision * I (dense kinds).
  Matrix precision() const;
  /// diag(data_term) + prior_precision.
  Vector precision_diagonal() const;
  GgnMatrix with_prior_precision(double lambda) const;
};

/// Accumulates the GGN in blocks of datapoints combined by a fixed pairwise
/// tree, so the result does not depend on thread count or call order.
/// kFull requires a full mask; kDiagonal stores only the diagonal of the
/// same sum.
GgnMatrix compute_ggn(const JacobianStack& stack, const SubnetworkMask& mask, GgnKind kind,
                      double prior_precision);

GgnMatrix compute_ggn(const MapEstimate& map, const Dataset& data, const SubnetworkMask& mask,
                      GgnKind kind, double prior_precision);

/// lambda_S = lambda * S / D.
double rescale_prior(double lambda_full, std::size_t s, std::size_t d);

class Posterior {
 public:
  virtual ~Posterior() = default;
  virtual const SubnetworkMask& mask() const = 0;
  /// Sigma = J C J^T for rows of J aligned with mask().selected().
  virtual Matrix linearized_variance(const Matrix& jac) const = 0;
  /// Draws w_S - mean.
  virtual Vector sample_offset(CounterRng& rng) const = 0;
  /// A (S x O) with A^T z ~ N(0, J C J^T) for z ~ N(0, I_S); the same draw as
  /// J * sample_offset for the same z.
  virtual Matrix sample_projection(const Matrix& jac) const = 0;
};

/// N(w_S; mean, H_S^{-1}) with the remaining parameters fixed at the MAP.
class GaussianPosterior final : public Posterior {
 public:
  GaussianPosterior(SubnetworkMask mask, Vector mean, linalg::CholeskyFactor precision_factor,
                    double prior_precision, double noise_variance, Vector map_weights);

  const SubnetworkMask& mask() const override { return mask_; }
  const Vector& mean() const { return mean_; }
  const linalg::CholeskyFactor& precision_factor() const { return factor_; }
  double prior_precision() const { return prior_precision_; }
  double noise_variance() const { return noise_variance_; }
  const Vector& map_weights() const { return map_weights_; }

  Matrix covariance() const;
  Vector marginal_variances() const;
  /// MAP values of every parameter outside the mask, in flat order.
  Vector complement_values() const;
  /// Full flat parameter vector with w_S written into the masked slots.
  Vector embed(const Vector& w_s) const;

  Matrix linearized_variance(const Matrix& jac) const override;
  Vector sample_offset(CounterRng& rng) const override;
  Matrix sample_projection(const Matrix& jac) const override;

 private:
  SubnetworkMask mask_;
  Vector mean_;
  linalg::CholeskyFactor factor_;
  double prior_precision_;
  double noise_variance_;
  Vector map_weights_;
};

/// Factorized Gaussian over the masked parameters (diagonal Laplace).
class DiagonalPosterior final : public Posterior {
 public:
  DiagonalPosterior(SubnetworkMask mask, Vector variances);

  const SubnetworkMask& mask() const override { return mask_; }
  const Vector& variances() const { return variances_; }

  Matrix linearized_variance(const Matrix& jac) const override;
  Vector sample_offset(CounterRng& rng) const override;
  Matrix sample_projection(const Matrix& jac) const override;

 private:
  SubnetworkMask mask_;
  Vector variances_;
};

/// Mean = MAP restricted to the mask, covariance = inverse of ggn.precision().
GaussianPosterior build_posterior(const GgnMatrix& ggn, const MapEstimate& map,
                                  const SubnetworkMask& mask);

/// Marginal of an existing Gaussian over a subset of its coordinates (the
/// covariance block is kept, not the conditional).
GaussianPosterior marginalize(const GaussianPosterior& posterior, const SubnetworkMask& keep);

DiagonalPosterior build_diagonal_posterior(const GgnMatrix& ggn);

/// diag(H^{-1}) from the dense GGN.
Vector exact_marginal_variances(const GgnMatrix& ggn_full);

/// 1 / diag(H): the diagonal Laplace approximation of the marginal variances.
Vector diag_marginal_variances(const GgnMatrix& ggn_diag);

}  // namespace sublaplace

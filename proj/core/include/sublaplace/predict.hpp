#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sublaplace/laplace.hpp"
#include "sublaplace/net.hpp"
#include "sublaplace/train.hpp"

namespace sublaplace {

/// Predictive distribution for a batch of N inputs.
struct Predictive {
  Task task = Task::kRegression;
  Matrix mean;                     // N x O network output at the MAP weights
  std::vector<Matrix> covariance;  // regression: Sigma_S(x) + sigma^2 I per input
  Matrix epistemic_variance;       // N x O, diag(Sigma_S(x))
  Matrix probabilities;            // classification: N x C

  std::size_t size() const { return static_cast<std::size_t>(mean.rows()); }
  /// Square root of the predictive covariance diagonal (regression).
  Matrix predictive_std() const;
};

/// J_S H_S^{-1} J_S^T for one input; the Jacobian columns must be exactly
/// the posterior's mask.
Matrix linearized_variance(const Posterior& posterior, const Jacobian& jac_s);

/// Gaussian predictive N(f(x, w_map), Sigma_S(x) + sigma^2 I). A null
/// posterior gives the MAP predictive (Sigma = 0).
Predictive predict_regression(const MapEstimate& map, const Posterior* posterior,
                              const Matrix& inputs);

/// softmax(f / sqrt(1 + pi/8 diag(Sigma_S(x)))), scaled per output.
Predictive predict_classification(const MapEstimate& map, const Posterior* posterior,
                                  const Matrix& inputs);

/// Dispatches on map.task.
Predictive predict(const MapEstimate& map, const Posterior* posterior, const Matrix& inputs);

/// n_samples x O draws of f_lin(x, w) = f(x, w_map) + J_S(x) (w_S - w_map_S) with
/// w_S from the posterior. The stream is CounterRng(derive_seed(seed, "predictive")).
Matrix sample_posterior_predictive(const MapEstimate& map, const Posterior& posterior,
                                   const Vector& x, std::size_t n_samples, std::uint64_t seed);

/// Monte-Carlo average of softmax over f_lin samples.
Vector mc_softmax(const MapEstimate& map, const Posterior& posterior, const Vector& x,
                  std::size_t n_samples, std::uint64_t seed);

/// Rows: id, mean_k / prob_k, std_k (regression).
std::string predictions_csv(const Predictive& pred);

Vector softmax(const Vector& logits);

}  // namespace sublaplace

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sublaplace/data.hpp"
#include "sublaplace/net.hpp"

namespace sublaplace {

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 2000;
  std::size_t patience = 500;
  std::uint64_t seed = 0;
  Task task = Task::kRegression;
  double initial_noise_log_variance = 0.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation set
};

struct MapEstimate {
  WeightVector weights;
  Task task = Task::kRegression;
  double noise_log_variance = 0.0;  // log sigma^2, regression only
  std::vector<double> val_metric_history;
  std::vector<EpochRecord> curve;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;

  const MlpArchitecture& architecture() const { return weights.architecture(); }
  double noise_variance() const { return std::exp(noise_log_variance); }
};

struct ObjectiveValue {
  double value = 0.0;
  Vector grad_weights;
  double grad_noise_log_variance = 0.0;
};

/// Mean negative log-likelihood over `data` (Gaussian with variance
/// exp(noise_log_variance) per output, or softmax cross-entropy).
double mean_nll(const WeightVector& w, double noise_log_variance, const Dataset& data);

/// What SGD minimizes: mean NLL over the batch + (weight_decay / 2) ||w||^2.
/// The noise parameter is not decayed.
ObjectiveValue training_objective(const WeightVector& w, double noise_log_variance,
                                  const Dataset& batch, double weight_decay);

/// Negative log joint -log p(y | X, w) - log N(w; 0, prior_precision^{-1} I),
/// summed over data, constants included.
ObjectiveValue negative_log_posterior(const WeightVector& w, double noise_log_variance,
                                      const Dataset& data, double prior_precision);

/// Mini-batch SGD with momentum (v <- mu v + g; w <- w - lr v). The returned
/// weights are those with the lowest validation loss; with an empty
/// validation set the final iterate is returned and patience must equal
/// max_epochs.
MapEstimate train_map(const MlpArchitecture& arch, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg);

/// Member 0 uses cfg.seed; member k > 0 uses derive_seed(cfg.seed, k).
std::vector<MapEstimate> train_ensemble(const MlpArchitecture& arch, const Dataset& train,
                                        const Dataset& val, const TrainConfig& cfg,
                                        std::size_t n_members = 5);

std::string curve_csv(const MapEstimate& map);

}  // namespace sublaplace

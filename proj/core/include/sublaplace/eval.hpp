#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sublaplace/data.hpp"
#include "sublaplace/laplace.hpp"
#include "sublaplace/predict.hpp"
#include "sublaplace/select.hpp"

namespace sublaplace {

inline constexpr double kProbabilityFloor = 1e-15;
inline constexpr std::size_t kDefaultEceBins = 15;

/// Prior precision grid used for validation tuning.
std::vector<double> default_lambda_grid();

/// Per-point log predictive density of the targets.
Vector pointwise_log_likelihood(const Predictive& pred, const Dataset& data);
/// Mean of pointwise_log_likelihood.
double log_likelihood(const Predictive& pred, const Dataset& data);
double rmse(const Predictive& pred, const Dataset& data);
double error_rate(const Predictive& pred, const Dataset& data);
/// Equal-width bins on the max probability; sum_b (n_b / N) |acc_b - conf_b|.
double ece(const Predictive& pred, const Dataset& data, std::size_t n_bins = kDefaultEceBins);
/// Mean over points of ||p - onehot(y)||^2.
double brier(const Predictive& pred, const Dataset& data);

/// Maps a regression predictive from standardized to original target units.
Predictive destandardize(const Predictive& pred, const Standardizer& s);

/// Log density of the equally weighted mixture of member predictives.
double ensemble_log_likelihood(const std::vector<Predictive>& members, const Dataset& data);

enum class MethodKind { kMap, kFull, kDiagonal, kFinalLayer, kSubnetwork };

struct MethodConfig {
  std::string label;
  MethodKind kind = MethodKind::kMap;
  SelectionStrategy strategy = SelectionStrategy::kWassersteinDiag;
  double fraction = 0.0;       // used when size == 0
  std::size_t size = 0;        // absolute S
  bool rescale_prior = true;   // lambda_S = lambda S / D
  bool include_biases = false;
  bool dead_filter = false;
  double dead_threshold = 0.0;
  std::uint64_t selection_seed = 0;

  bool needs_full_curvature() const;
};

/// Curvature reused across methods and lambda values: the stacked Jacobian
/// over all D eligible parameters plus the data terms of the full and
/// diagonal GGN.
struct CurvatureCache {
  JacobianStack stack;
  std::optional<GgnMatrix> full;
  GgnMatrix diagonal;
  std::size_t total = 0;
};

CurvatureCache build_curvature(const MapEstimate& map, const Dataset& train,
                               bool include_biases, bool with_full);

struct FittedMethod {
  MethodConfig config;
  double lambda = 0.0;          // full-network prior precision
  double lambda_used = 0.0;     // after rescaling
  std::optional<SubnetworkMask> mask;
  std::shared_ptr<const Posterior> posterior;  // null for MAP

  std::size_t subnetwork_size() const { return mask ? mask->size() : 0; }
};

FittedMethod fit_method(const MapEstimate& map, const CurvatureCache& curvature,
                        const MethodConfig& config, double lambda);

struct GridSearchResult {
  double best_lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> val_log_likelihood;
  FittedMethod fitted;
};

/// Fits the method for every lambda and keeps the one with the highest mean
/// validation log-likelihood; ties go to the smaller lambda.
GridSearchResult grid_search_lambda(const MapEstimate& map, const CurvatureCache& curvature,
                                    const Dataset& val, const MethodConfig& config,
                                    std::vector<double> grid = default_lambda_grid());

struct MetricRow {
  std::string dataset;
  std::string split;
  std::uint64_t seed = 0;
  std::string method;
  std::size_t s = 0;
  double lambda = 0.0;
  std::string metric;
  double value = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population std
  std::size_t count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

/// Long-format CSV: dataset,split,seed,method,S,lambda,metric,value.
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// mean/std/count per (dataset, split kind, method, metric), where split
/// kind is the part of the split name before ':'.
std::map<std::string, Aggregate> summarize(const std::vector<MetricRow>& rows);

/// Runs fn(i) for i in [0, n) on `workers` threads; results are stored by
/// index so ordering does not depend on scheduling. workers == 0 reads
/// SUBLAPLACE_WORKERS (default 1).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

std::size_t worker_count_from_env();

}  // namespace sublaplace

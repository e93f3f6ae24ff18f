#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sublaplace/eval.hpp"
#include "sublaplace/train.hpp"

namespace sublaplace {

MethodConfig map_method();
MethodConfig full_method();
MethodConfig diagonal_method();
MethodConfig final_layer_method();
/// Label "<Wass|Rand|Mag|...>-<percent>%", e.g. "Wass-3%".
MethodConfig subnetwork_method(SelectionStrategy strategy, double fraction,
                               std::uint64_t selection_seed = 0);

struct ToyExperimentConfig {
  std::size_t n_per_cluster = 50;
  double noise_std = 0.1;
  MlpArchitecture arch{1, {50, 50}, 1};
  double lambda = 3.0;
  std::vector<double> fractions{0.5, 0.03, 0.01};
  std::size_t random_seeds = 5;
  std::size_t in_between_points = 50;
  std::size_t plot_points = 200;
  double plot_lo = -3.0;
  double plot_hi = 3.0;
  SelectionStrategy wass_strategy = SelectionStrategy::kWassersteinExact;
  /// Excludes parameters with zero data curvature from Wasserstein selection.
  bool dead_filter = false;
  TrainConfig train;
  std::uint64_t seed = 0;

  ToyExperimentConfig();
};

struct ToyMethodResult {
  std::string label;
  std::size_t s = 0;
  double lambda_used = 0.0;
  /// Mean epistemic std sqrt(diag Sigma_S(x)) over the in-between grid.
  double in_between_std = 0.0;
  /// Mean predictive std sqrt(Sigma_S(x) + sigma^2) over the in-between grid.
  double in_between_predictive_std = 0.0;
  Vector plot_mean;
  Vector plot_std;  // predictive std on the plot grid
  Vector in_between_mean;
  double train_ll = 0.0;
};

struct ToyReport {
  Dataset train;
  MapEstimate map;
  std::size_t total = 0;  // D
  Vector plot_x;
  std::vector<ToyMethodResult> methods;
  /// Rand-<f>% entries averaged over selection seeds; per-seed entries are
  /// labelled "Rand-<f>%#<k>".
  const ToyMethodResult& find(const std::string& label) const;
};

ToyReport run_toy_experiment(const ToyExperimentConfig& config);

/// One row per method: label, S, lambda_S, in_between_std, ...
std::string toy_summary_csv(const ToyReport& report);
/// Long format: method,x,mean,std over the plot grid.
std::string toy_series_csv(const ToyReport& report);

struct TabularExperimentConfig {
  std::string dataset_name = "synthetic-wine";
  Dataset data;
  MlpArchitecture arch{11, {50}, 1};
  std::size_t standard_splits = 20;
  bool gap_splits = true;
  std::size_t max_gap_splits = 0;  // 0: one per input dimension
  std::vector<MethodConfig> methods;
  std::vector<double> grid = default_lambda_grid();
  bool include_biases = false;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: SUBLAPLACE_WORKERS
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  std::map<std::string, Aggregate> summary;

  /// Mean of `metric` for `method` over splits whose name starts with
  /// `split_kind`.
  Aggregate get(const std::string& split_kind, const std::string& method,
                const std::string& metric) const;
};

/// For each split: standardize on train, train MAP with early stopping on
/// validation, tune lambda per method on validation, and report test
/// metrics in original target units.
ExperimentResult run_tabular_experiment(const TabularExperimentConfig& config);

struct ClassificationExperimentConfig {
  std::size_t n_train = 200;
  std::size_t n_val = 100;
  std::size_t n_test = 500;
  double noise_std = 0.15;
  MlpArchitecture arch{2, {50, 50}, 2};
  std::vector<MethodConfig> methods;
  std::vector<double> grid = default_lambda_grid();
  TrainConfig train;
  std::uint64_t seed = 0;
};

ExperimentResult run_two_moons_experiment(const ClassificationExperimentConfig& config);

/// Plot-ready series: method,S,mean,std for `metric` per split kind.
std::string series_csv(const ExperimentResult& result, const std::string& metric);
std::string summary_json(const ExperimentResult& result);

}  // namespace sublaplace

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sublaplace/common.hpp"

namespace sublaplace {

/// Per-feature affine standardization fitted on a training portion.
struct Standardizer {
  Vector input_mean;
  Vector input_std;
  Vector target_mean;  // empty for classification
  Vector target_std;

  bool empty() const { return input_mean.size() == 0; }
};

// Inputs are N x I. Regression targets are N x O; classification uses
// integer labels in [0, num_classes).
struct Dataset {
  Task task = Task::kRegression;
  Matrix inputs;
  Matrix targets;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  /// Network output dimension implied by the data.
  std::size_t output_dim() const;
  bool empty() const { return size() == 0; }

  Dataset subset(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

enum class SplitKind { kStandard, kGap };

struct SplitSpec {
  SplitKind kind = SplitKind::kStandard;
  double train_frac = 0.9;
  double val_frac_of_train = 0.15;
  std::size_t gap_dimension = 0;
  std::uint64_t seed = 0;

  void validate(std::size_t input_dim) const;
};

/// Seeded shuffle, then test = round(N * (1 - train_frac)) points, and
/// val = ceil(val_frac * remaining) points carved from the remainder.
Split split_standard(const Dataset& data, const SplitSpec& spec);

/// Sorts by feature `dim`; points at sorted positions [round(N/3), round(2N/3))
/// form the test set. The rest is shuffled with spec.seed and
/// ceil(val_frac * remaining) points go to validation.
Split split_gap(const Dataset& data, std::size_t dim, const SplitSpec& spec);

Split make_split(const Dataset& data, const SplitSpec& spec);

Standardizer fit_standardizer(const Dataset& train);
Dataset standardize(const Dataset& data, const Standardizer& s);
Dataset destandardize(const Dataset& data, const Standardizer& s);
Split standardize(const Split& split, const Standardizer& s);

/// Geometry of the two-cluster toy problem. Inputs are drawn uniformly from
/// [left_lo, left_hi] and [right_lo, right_hi]; everything strictly between
/// the clusters is the "in-between" region.
struct ToyGeometry {
  double left_lo = -2.0;
  double left_hi = -0.75;
  double right_lo = 0.75;
  double right_hi = 2.0;
};

inline constexpr ToyGeometry kToyGeometry{};

/// Smooth generating function of the toy targets.
double toy_function(double x);

Dataset make_toy_1d(std::size_t n_per_cluster, double noise_std, std::uint64_t seed);

/// Evenly spaced grid strictly inside the gap between the clusters.
Matrix toy_in_between_grid(std::size_t n);

/// Two interleaved half circles, labels 0/1.
Dataset make_two_moons(std::size_t n, double noise_std, std::uint64_t seed);

/// Wine-shaped synthetic regression data: correlated, partly skewed features
/// and a nonlinear target with heteroscedastic noise.
Dataset make_synthetic_tabular(std::size_t n = 1599, std::size_t input_dim = 11,
                               std::uint64_t seed = 0);

struct CsvSchema {
  std::vector<std::string> target_columns;  // empty: last column
  Task task = Task::kRegression;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
std::string to_csv(const Dataset& data);
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace sublaplace

#include "sublaplace/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sublaplace/io.hpp"
#include "sublaplace/rng.hpp"

namespace sublaplace {
namespace {

std::string percent_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g%%", fraction * 100.0);
  return buf;
}

std::string strategy_prefix(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kWassersteinExact:
    case SelectionStrategy::kWassersteinDiag: return "Wass";
    case SelectionStrategy::kRandom: return "Rand";
    case SelectionStrategy::kFinalLayer: return "LastLayer";
    case SelectionStrategy::kMagnitude: return "Mag";
  }
  return "Sub";
}

double mean_sqrt(const Matrix& variances) {
  return variances.array().max(0.0).sqrt().mean();
}

struct SplitOutcome {
  std::vector<MetricRow> rows;
};

void add_row(std::vector<MetricRow>& rows, const std::string& dataset, const std::string& split,
             std::uint64_t seed, const FittedMethod& fm, const std::string& metric, double value) {
  rows.push_back({dataset, split, seed, fm.config.label, fm.subnetwork_size(), fm.lambda, metric,
                  value});
}

FittedMethod tune(const MapEstimate& map, const CurvatureCache& curvature, const Dataset& val,
                  const MethodConfig& method, const std::vector<double>& grid) {
  if (method.kind == MethodKind::kMap) return fit_method(map, curvature, method, 0.0);
  return grid_search_lambda(map, curvature, val, method, grid).fitted;
}

bool any_needs_full(const std::vector<MethodConfig>& methods) {
  for (const auto& m : methods) {
    if (m.needs_full_curvature()) return true;
  }
  return false;
}

}  // namespace

MethodConfig map_method() {
  MethodConfig m;
  m.label = "MAP";
  m.kind = MethodKind::kMap;
  return m;
}

MethodConfig full_method() {
  MethodConfig m;
  m.label = "Full";
  m.kind = MethodKind::kFull;
  return m;
}

MethodConfig diagonal_method() {
  MethodConfig m;
  m.label = "Diag";
  m.kind = MethodKind::kDiagonal;
  return m;
}

MethodConfig final_layer_method() {
  MethodConfig m;
  m.label = "Final-layer";
  m.kind = MethodKind::kFinalLayer;
  return m;
}

MethodConfig subnetwork_method(SelectionStrategy strategy, double fraction,
                               std::uint64_t selection_seed) {
  MethodConfig m;
  m.label = strategy_prefix(strategy) + "-" + percent_label(fraction);
  m.kind = MethodKind::kSubnetwork;
  m.strategy = strategy;
  m.fraction = fraction;
  m.selection_seed = selection_seed;
  return m;
}

ToyExperimentConfig::ToyExperimentConfig() {
  train.patience = train.max_epochs;
}

const ToyMethodResult& ToyReport::find(const std::string& label) const {
  for (const auto& m : methods) {
    if (m.label == label) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "no method '" + label + "' in toy report");
}

ToyReport run_toy_experiment(const ToyExperimentConfig& config) {
  Dataset train = make_toy_1d(config.n_per_cluster, config.noise_std, derive_seed(config.seed, "data"));
  TrainConfig tc = config.train;
  tc.task = Task::kRegression;
  tc.seed = derive_seed(config.seed, "train");
  MapEstimate trained = train_map(config.arch, train, train.subset({}), tc);
  ToyReport report{std::move(train), std::move(trained), 0, {}, {}};
  const MapEstimate& map = report.map;
  const CurvatureCache curvature = build_curvature(map, report.train, false, true);
  report.total = curvature.total;

  const Matrix gap_grid = toy_in_between_grid(config.in_between_points);
  report.plot_x = Vector::LinSpaced(static_cast<Index>(config.plot_points), config.plot_lo,
                                    config.plot_hi);
  const Matrix plot_inputs = report.plot_x;

  std::vector<MethodConfig> methods{map_method(), full_method(), diagonal_method(),
                                    final_layer_method()};
  for (double f : config.fractions) {
    MethodConfig m = subnetwork_method(config.wass_strategy, f);
    m.dead_filter = config.dead_filter;
    methods.push_back(m);
  }
  for (double f : config.fractions) {
    for (std::size_t k = 0; k < config.random_seeds; ++k) {
      MethodConfig m = subnetwork_method(SelectionStrategy::kRandom, f,
                                         derive_seed(derive_seed(config.seed, "random-select"), k));
      m.label += "#" + std::to_string(k);
      methods.push_back(m);
    }
  }

  for (const auto& method : methods) {
    const FittedMethod fm = fit_method(map, curvature, method, config.lambda);
    const Predictive gap = predict_regression(map, fm.posterior.get(), gap_grid);
    const Predictive plot = predict_regression(map, fm.posterior.get(), plot_inputs);
    const Predictive fit = predict_regression(map, fm.posterior.get(), report.train.inputs);
    ToyMethodResult r;
    r.label = method.label;
    r.s = fm.subnetwork_size();
    r.lambda_used = fm.lambda_used;
    r.in_between_std = mean_sqrt(gap.epistemic_variance);
    r.in_between_predictive_std = gap.predictive_std().mean();
    r.in_between_mean = gap.mean.col(0);
    r.plot_mean = plot.mean.col(0);
    r.plot_std = plot.predictive_std().col(0);
    r.train_ll = log_likelihood(fit, report.train);
    report.methods.push_back(std::move(r));
  }

  // seed-averaged random entries
  for (double f : config.fractions) {
    if (config.random_seeds == 0) break;
    const std::string base = subnetwork_method(SelectionStrategy::kRandom, f).label;
    ToyMethodResult avg;
    avg.label = base;
    const double k = static_cast<double>(config.random_seeds);
    for (std::size_t i = 0; i < config.random_seeds; ++i) {
      const ToyMethodResult& r = report.find(base + "#" + std::to_string(i));
      if (i == 0) {
        avg = r;
        avg.label = base;
        avg.in_between_std = avg.in_between_predictive_std = avg.train_ll = 0.0;
        avg.plot_std.setZero();
      }
      avg.in_between_std += r.in_between_std / k;
      avg.in_between_predictive_std += r.in_between_predictive_std / k;
      avg.train_ll += r.train_ll / k;
      avg.plot_std += r.plot_std / k;
    }
    report.methods.push_back(std::move(avg));
  }
  return report;
}

std::string toy_summary_csv(const ToyReport& report) {
  std::ostringstream os;
  os << "method,S,D,lambda_S,in_between_std,in_between_predictive_std,train_ll\n";
  for (const auto& m : report.methods) {
    os << m.label << ',' << m.s << ',' << report.total << ',' << io::format_double(m.lambda_used)
       << ',' << io::format_double(m.in_between_std) << ','
       << io::format_double(m.in_between_predictive_std) << ',' << io::format_double(m.train_ll)
       << '\n';
  }
  return os.str();
}

std::string toy_series_csv(const ToyReport& report) {
  std::ostringstream os;
  os << "method,x,mean,std\n";
  for (const auto& m : report.methods) {
    for (Index i = 0; i < report.plot_x.size(); ++i) {
      os << m.label << ',' << io::format_double(report.plot_x[i]) << ','
         << io::format_double(m.plot_mean[i]) << ',' << io::format_double(m.plot_std[i]) << '\n';
    }
  }
  return os.str();
}

Aggregate ExperimentResult::get(const std::string& split_kind, const std::string& method,
                                const std::string& metric) const {
  std::vector<double> values;
  for (const auto& r : rows) {
    if (r.method == method && r.metric == metric && r.split.rfind(split_kind, 0) == 0) {
      values.push_back(r.value);
    }
  }
  return aggregate(values);
}

ExperimentResult run_tabular_experiment(const TabularExperimentConfig& config) {
  config.data.validate();
  if (config.data.task != Task::kRegression) {
    throw Error(ErrorCode::kTaskMismatch, "tabular experiment expects regression data");
  }
  if (config.methods.empty()) throw Error(ErrorCode::kInvalidArgument, "no methods given");
  MlpArchitecture arch = config.arch;
  arch.input_dim = config.data.input_dim();
  arch.output_dim = config.data.output_dim();
  arch.validate();

  std::vector<SplitSpec> specs;
  std::vector<std::string> names;
  const std::uint64_t split_root = derive_seed(config.seed, "split");
  for (std::size_t i = 0; i < config.standard_splits; ++i) {
    SplitSpec s;
    s.seed = derive_seed(split_root, i);
    specs.push_back(s);
    names.push_back("standard:" + std::to_string(i));
  }
  if (config.gap_splits) {
    std::size_t n_gap = config.data.input_dim();
    if (config.max_gap_splits > 0) n_gap = std::min(n_gap, config.max_gap_splits);
    for (std::size_t d = 0; d < n_gap; ++d) {
      SplitSpec s;
      s.kind = SplitKind::kGap;
      s.gap_dimension = d;
      s.seed = derive_seed(derive_seed(split_root, "gap"), d);
      specs.push_back(s);
      names.push_back("gap:" + std::to_string(d));
    }
  }

  const bool need_full = any_needs_full(config.methods);
  std::vector<SplitOutcome> outcomes(specs.size());
  parallel_for(
      specs.size(),
      [&](std::size_t i) {
        const Split raw = make_split(config.data, specs[i]);
        const Standardizer st = fit_standardizer(raw.train);
        const Split sp = standardize(raw, st);
        TrainConfig tc = config.train;
        tc.task = Task::kRegression;
        tc.seed = derive_seed(derive_seed(config.seed, "train"), names[i]);
        const MapEstimate map = train_map(arch, sp.train, sp.val, tc);
        const CurvatureCache curvature =
            build_curvature(map, sp.train, config.include_biases, need_full);
        auto& rows = outcomes[i].rows;
        for (MethodConfig method : config.methods) {
          method.include_biases = config.include_biases;
          const FittedMethod fm = tune(map, curvature, sp.val, method, config.grid);
          const Predictive val_pred = predict_regression(map, fm.posterior.get(), sp.val.inputs);
          const Predictive test_pred =
              destandardize(predict_regression(map, fm.posterior.get(), sp.test.inputs), st);
          add_row(rows, config.dataset_name, names[i], tc.seed, fm, "test_ll",
                  log_likelihood(test_pred, raw.test));
          add_row(rows, config.dataset_name, names[i], tc.seed, fm, "test_rmse",
                  rmse(test_pred, raw.test));
          add_row(rows, config.dataset_name, names[i], tc.seed, fm, "val_ll_standardized",
                  log_likelihood(val_pred, sp.val));
        }
      },
      config.workers);

  ExperimentResult result;
  for (auto& o : outcomes) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
  }
  result.summary = summarize(result.rows);
  return result;
}

ExperimentResult run_two_moons_experiment(const ClassificationExperimentConfig& config) {
  if (config.methods.empty()) throw Error(ErrorCode::kInvalidArgument, "no methods given");
  const Dataset train = make_two_moons(config.n_train, config.noise_std, derive_seed(config.seed, "train-data"));
  const Dataset val = make_two_moons(config.n_val, config.noise_std, derive_seed(config.seed, "val-data"));
  const Dataset test = make_two_moons(config.n_test, config.noise_std, derive_seed(config.seed, "test-data"));
  TrainConfig tc = config.train;
  tc.task = Task::kClassification;
  tc.seed = derive_seed(config.seed, "train");
  const MapEstimate map = train_map(config.arch, train, val, tc);
  const CurvatureCache curvature = build_curvature(map, train, false, any_needs_full(config.methods));
  ExperimentResult result;
  const std::string split = "standard:0";
  for (const auto& method : config.methods) {
    const FittedMethod fm = tune(map, curvature, val, method, config.grid);
    const Predictive pred = predict_classification(map, fm.posterior.get(), test.inputs);
    add_row(result.rows, "two-moons", split, tc.seed, fm, "test_ll", log_likelihood(pred, test));
    add_row(result.rows, "two-moons", split, tc.seed, fm, "test_error", error_rate(pred, test));
    add_row(result.rows, "two-moons", split, tc.seed, fm, "test_ece", ece(pred, test));
    add_row(result.rows, "two-moons", split, tc.seed, fm, "test_brier", brier(pred, test));
  }
  result.summary = summarize(result.rows);
  return result;
}

std::string series_csv(const ExperimentResult& result, const std::string& metric) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<double>> groups;
  for (const auto& r : result.rows) {
    if (r.metric != metric) continue;
    groups[{r.split.substr(0, r.split.find(':')), r.method, r.s}].push_back(r.value);
  }
  std::ostringstream os;
  os << "split_kind,method,S,mean,std,count\n";
  for (const auto& [key, values] : groups) {
    const Aggregate a = aggregate(values);
    os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
       << io::format_double(a.mean) << ',' << io::format_double(a.std) << ',' << a.count << '\n';
  }
  return os.str();
}

std::string summary_json(const ExperimentResult& result) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [key, a] : result.summary) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '|');) parts.push_back(p);
    j.push_back({{"dataset", parts.at(0)},
                 {"split_kind", parts.at(1)},
                 {"method", parts.at(2)},
                 {"metric", parts.at(3)},
                 {"mean", a.mean},
                 {"std", a.std},
                 {"count", a.count}});
  }
  return j.dump(1) + "\n";
}

}  // namespace sublaplace

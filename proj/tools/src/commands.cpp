#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "sublaplace/experiments.hpp"
#include "sublaplace/io.hpp"

namespace sublaplace::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

std::string num(double v) { return io::format_double(v); }

Checkpoint read_checkpoint(const fs::path& path) {
  require_file(path);
  return load_checkpoint(path);
}

SelectionStrategy parse_strategy(const std::string& name) {
  try {
    return strategy_from_string(name);
  } catch (const Error&) {
    throw UsageError("unknown --strategy '" + name + "'");
  }
}

struct Curvature {
  CurvatureCache cache;
  std::optional<GgnMatrix> scored;  // the GGN the scores were computed from
};

Curvature curvature_for(const Checkpoint& ckpt, const Dataset& train, SelectionStrategy strategy,
                        bool include_biases, double lambda) {
  Curvature c{build_curvature(ckpt.map, train, include_biases,
                              strategy == SelectionStrategy::kWassersteinExact),
              std::nullopt};
  if (strategy == SelectionStrategy::kWassersteinExact) {
    c.scored = c.cache.full->with_prior_precision(lambda);
  } else if (strategy == SelectionStrategy::kWassersteinDiag) {
    c.scored = c.cache.diagonal.with_prior_precision(lambda);
  }
  return c;
}

std::string scores_csv(const Vector& scores) {
  std::ostringstream os;
  os << "index,score\n";
  for (Index i = 0; i < scores.size(); ++i) os << i << ',' << num(scores[i]) << '\n';
  return os.str();
}

std::string histogram_csv(const Vector& scores, const SubnetworkMask& mask, std::size_t bins) {
  Vector logs(scores.size());
  for (Index i = 0; i < scores.size(); ++i) logs[i] = std::log10(std::max(scores[i], 1e-300));
  const double lo = logs.minCoeff();
  const double hi = logs.maxCoeff();
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  std::vector<std::size_t> count(bins, 0), chosen(bins, 0);
  for (Index i = 0; i < logs.size(); ++i) {
    auto b = static_cast<std::size_t>((logs[i] - lo) / width);
    b = std::min(b, bins - 1);
    ++count[b];
    if (mask.contains(static_cast<std::size_t>(i))) ++chosen[b];
  }
  std::ostringstream os;
  os << "bin_lo_log10,bin_hi_log10,count,selected\n";
  for (std::size_t b = 0; b < bins; ++b) {
    os << num(lo + width * static_cast<double>(b)) << ',' << num(lo + width * static_cast<double>(b + 1))
       << ',' << count[b] << ',' << chosen[b] << '\n';
  }
  return os.str();
}

json metrics_json(const Predictive& pred, const Dataset& data) {
  json j;
  j["points"] = data.size();
  j["test_ll"] = log_likelihood(pred, data);
  if (pred.task == Task::kRegression) {
    j["test_rmse"] = rmse(pred, data);
  } else {
    j["test_error"] = error_rate(pred, data);
    j["test_ece"] = ece(pred, data);
    j["test_brier"] = brier(pred, data);
  }
  return j;
}

void write_experiment(const ExperimentResult& r, const fs::path& dir, Manifest& m,
                      const std::vector<std::string>& metrics) {
  fs::create_directories(dir);
  io::write_text_atomic(dir / "metrics.csv", metrics_csv(r.rows));
  m.add_output(dir / "metrics.csv");
  io::write_text_atomic(dir / "summary.json", summary_json(r));
  m.add_output(dir / "summary.json");
  for (const auto& metric : metrics) {
    const fs::path p = dir / ("series_" + metric + ".csv");
    io::write_text_atomic(p, series_csv(r, metric));
    m.add_output(p);
  }
}

void print_summary(const ExperimentResult& r, const std::vector<MethodConfig>& methods,
                   const std::string& metric) {
  std::printf("%-14s %-9s %12s %10s %6s\n", "method", "split", metric.c_str(), "std", "n");
  for (const char* kind : {"standard", "gap"}) {
    for (const auto& mc : methods) {
      const Aggregate a = r.get(kind, mc.label, metric);
      if (a.count == 0) continue;
      std::printf("%-14s %-9s %12.4f %10.4f %6zu\n", mc.label.c_str(), kind, a.mean, a.std, a.count);
    }
  }
}

json methods_json(const std::vector<MethodConfig>& methods) {
  json out = json::array();
  for (const auto& mc : methods) {
    out.push_back({{"label", mc.label},
                   {"strategy", std::string(to_string(mc.strategy))},
                   {"fraction", mc.fraction},
                   {"rescale_prior", mc.rescale_prior}});
  }
  return out;
}

}  // namespace

void cmd_train(const TrainOptions& o, Manifest& m) {
  require_file(o.data);
  const Task task = task_from_string(o.task);
  const Dataset raw = load_csv(o.data, CsvSchema{o.targets, task});

  std::optional<SplitSpec> spec;
  Dataset train = raw;
  Dataset val = raw.subset({});
  if (o.split.kind != "none") {
    SplitSpec s;
    if (o.split.kind == "gap") {
      s.kind = SplitKind::kGap;
    } else if (o.split.kind != "standard") {
      throw UsageError("--split must be standard, gap or none");
    }
    s.train_frac = o.split.train_frac;
    s.val_frac_of_train = o.split.val_frac;
    s.gap_dimension = o.split.gap_dim;
    s.seed = o.split.split_seed.value_or(derive_seed(o.seed, "split"));
    s.validate(raw.input_dim());
    const Split split = make_split(raw, s);
    train = split.train;
    val = split.val;
    spec = s;
  }
  Standardizer st;
  if (!o.no_standardize) {
    st = fit_standardizer(train);
    train = standardize(train, st);
    val = standardize(val, st);
  }

  TrainConfig cfg = o.train;
  cfg.task = task;
  cfg.seed = o.seed;
  cfg.patience = std::min(cfg.patience, cfg.max_epochs);
  if (val.empty() && cfg.patience < cfg.max_epochs) {
    std::cerr << "note: no validation split; training for all " << cfg.max_epochs << " epochs\n";
    cfg.patience = cfg.max_epochs;
  }
  const MlpArchitecture arch =
      make_architecture(raw.input_dim(), raw.output_dim(), o.arch.widths, o.arch.hidden, o.arch.layers);

  Checkpoint ckpt{train_map(arch, train, val, cfg), {}};
  ckpt.meta.train = cfg;
  ckpt.meta.split = spec;
  ckpt.meta.standardizer = st;
  ckpt.meta.data_path = fs::absolute(o.data).lexically_normal().string();
  ckpt.meta.target_columns = task == Task::kRegression ? raw.target_names : o.targets;
  if (ckpt.meta.target_columns.empty() && !raw.target_names.empty()) {
    ckpt.meta.target_columns = raw.target_names;
  }

  save_checkpoint(ckpt, o.out);
  const fs::path curve = sibling(o.out, ".curve.csv");
  io::write_text_atomic(curve, curve_csv(ckpt.map));

  m.config()["data"] = ckpt.meta.data_path;
  m.config()["targets"] = ckpt.meta.target_columns;
  m.config()["architecture"] = to_json(arch);
  m.config()["train"] = to_json(cfg);
  m.config()["split"] = spec ? to_json(*spec) : json(nullptr);
  m.config()["standardize"] = !o.no_standardize;
  m.results()["best_epoch"] = ckpt.map.best_epoch;
  m.results()["epochs_run"] = ckpt.map.curve.size();
  m.results()["train_points"] = train.size();
  m.results()["val_points"] = val.size();
  if (task == Task::kRegression) m.results()["noise_variance"] = ckpt.map.noise_variance();
  m.add_output(o.out);
  m.add_output(curve);
  m.write(manifest_path_for(o.out));
  std::cout << "checkpoint: " << o.out.string() << " (best epoch " << ckpt.map.best_epoch << " of "
            << ckpt.map.curve.size() << ")\n";
}

void cmd_score(const ScoreOptions& o, Manifest& m) {
  const Checkpoint ckpt = read_checkpoint(o.curv.checkpoint);
  const SelectionStrategy strategy = parse_strategy(o.curv.strategy);
  if (strategy == SelectionStrategy::kRandom || strategy == SelectionStrategy::kFinalLayer) {
    throw UsageError("strategy '" + o.curv.strategy + "' has no per-weight scores");
  }
  const std::size_t total = ckpt.map.weights.layout().eligible_count(o.curv.include_biases);
  SelectionScores scores;
  if (strategy == SelectionStrategy::kMagnitude) {
    scores = score_weights(strategy, ckpt.map, nullptr, total);
  } else {
    const DataContext ctx = load_context(ckpt, o.curv.data);
    const Curvature c = curvature_for(ckpt, ctx.train, strategy, o.curv.include_biases, o.curv.lambda);
    scores = score_weights(strategy, ckpt.map, &*c.scored, total);
  }
  io::write_text_atomic(o.out, scores_csv(scores.score_per_weight));
  m.config()["checkpoint"] = o.curv.checkpoint.string();
  m.config()["strategy"] = std::string(to_string(strategy));
  m.config()["lambda"] = o.curv.lambda;
  m.config()["include_biases"] = o.curv.include_biases;
  m.results()["total"] = total;
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  std::cout << "scores: " << o.out.string() << " (" << total << " parameters)\n";
}

void cmd_select(const SelectOptionsCli& o, Manifest& m) {
  const Checkpoint ckpt = read_checkpoint(o.curv.checkpoint);
  const SelectionStrategy strategy = parse_strategy(o.curv.strategy);
  const MlpArchitecture& arch = ckpt.map.architecture();
  const std::size_t total = ckpt.map.weights.layout().eligible_count(o.curv.include_biases);

  std::size_t s = 0;
  if (strategy == SelectionStrategy::kFinalLayer) {
    if (o.fraction || o.size) {
      std::cerr << "warning: --fraction/--size are ignored for final-layer; the whole output "
                   "layer is selected\n";
    }
  } else {
    if (o.fraction.has_value() == o.size.has_value()) {
      throw UsageError("give exactly one of --fraction or --size");
    }
    s = o.size ? *o.size : size_from_fraction(*o.fraction, total);
  }

  const bool variance = strategy == SelectionStrategy::kWassersteinExact ||
                        strategy == SelectionStrategy::kWassersteinDiag;
  std::optional<Curvature> curv;
  if (variance || o.dead_filter) {
    const DataContext ctx = load_context(ckpt, o.curv.data);
    curv = curvature_for(ckpt, ctx.train, strategy, o.curv.include_biases, o.curv.lambda);
  }
  SelectionScores scores{strategy, {}};
  if (variance) {
    scores = score_weights(strategy, ckpt.map, &*curv->scored, total);
  } else if (strategy == SelectionStrategy::kMagnitude) {
    scores = score_weights(strategy, ckpt.map, nullptr, total);
  }

  SelectOptions so;
  so.seed = derive_seed(o.seed, "select");
  so.include_biases = o.curv.include_biases;
  if (o.dead_filter) so.excluded = dead_weight_filter(curv->cache.diagonal.data_diagonal, o.dead_threshold);
  const SubnetworkMask mask = select_subnetwork(scores, s, arch, so);

  save_mask(mask, o.out);
  m.add_output(o.out);
  if (scores.has_scores()) {
    const fs::path hist = sibling(o.out, ".hist.csv");
    io::write_text_atomic(hist, histogram_csv(scores.score_per_weight, mask, o.histogram_bins));
    m.add_output(hist);
    m.results()["residual_objective"] = residual_variance(scores.score_per_weight, mask);
  }
  m.config()["checkpoint"] = o.curv.checkpoint.string();
  m.config()["strategy"] = std::string(to_string(strategy));
  m.config()["fraction"] = o.fraction ? json(*o.fraction) : json(nullptr);
  m.config()["size"] = o.size ? json(*o.size) : json(nullptr);
  m.config()["lambda"] = o.curv.lambda;
  m.config()["include_biases"] = o.curv.include_biases;
  m.config()["dead_filter"] = o.dead_filter;
  m.config()["dead_threshold"] = o.dead_threshold;
  m.config()["seed"] = o.seed;
  m.results()["selected"] = mask.size();
  m.results()["total"] = mask.total();
  m.results()["excluded"] = so.excluded.size();
  m.write(manifest_path_for(o.out));
  std::cout << "mask: " << o.out.string() << " (" << mask.size() << " of " << mask.total() << ")\n";
}

void cmd_infer(const InferOptions& o, Manifest& m) {
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  if (o.mask) require_file(*o.mask);
  const SubnetworkMask mask =
      o.mask ? load_mask(*o.mask) : SubnetworkMask::full(ckpt.map.architecture().weight_count());
  if (mask.total() > ckpt.map.weights.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "mask total exceeds checkpoint parameter count");
  }
  if (!(o.lambda > 0.0)) throw UsageError("--lambda must be > 0");
  const DataContext ctx = load_context(ckpt, o.data);
  const double lambda_s = o.no_rescale ? o.lambda : rescale_prior(o.lambda, mask.size(), mask.total());
  const PosteriorRecord record{o.lambda, lambda_s, !o.no_rescale};

  double jitter = 0.0;
  if (o.diagonal) {
    const DiagonalPosterior post =
        build_diagonal_posterior(compute_ggn(ckpt.map, ctx.train, mask, GgnKind::kDiagonal, lambda_s));
    save_posterior(post, record, o.out);
  } else {
    const GaussianPosterior post = build_posterior(
        compute_ggn(ckpt.map, ctx.train, mask, GgnKind::kSubnetwork, lambda_s), ckpt.map, mask);
    jitter = post.precision_factor().jitter_applied();
    save_posterior(post, record, o.out);
  }
  m.config()["checkpoint"] = o.checkpoint.string();
  m.config()["mask"] = o.mask ? json(o.mask->string()) : json(nullptr);
  m.config()["lambda"] = o.lambda;
  m.config()["rescale_prior"] = !o.no_rescale;
  m.config()["diagonal"] = o.diagonal;
  m.results()["lambda_s"] = lambda_s;
  m.results()["subnetwork_size"] = mask.size();
  m.results()["total"] = mask.total();
  m.results()["jitter"] = jitter;
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  std::cout << "posterior: " << o.out.string() << " (S=" << mask.size() << ", lambda_S=" << num(lambda_s)
            << ")\n";
}

namespace {

struct Evaluation {
  Predictive pred;
  Dataset data;  // original units
};

Evaluation evaluate_artifacts(const Checkpoint& ckpt, const Posterior* post,
                              const std::optional<fs::path>& data) {
  const Standardizer& st = ckpt.meta.standardizer;
  Dataset target;
  if (data) {
    require_file(*data);
    const Dataset raw = load_csv(*data, schema_for(ckpt));
    target = st.empty() ? raw : standardize(raw, st);
  } else {
    const DataContext ctx = load_context(ckpt, std::nullopt);
    target = ctx.has_split ? ctx.test : ctx.train;
  }
  Predictive pred = predict(ckpt.map, post, target.inputs);
  if (ckpt.map.task == Task::kRegression && !st.empty()) {
    pred = destandardize(pred, st);
    target = destandardize(target, st);
  }
  return {std::move(pred), std::move(target)};
}

std::unique_ptr<Posterior> maybe_posterior(const std::optional<fs::path>& path, const MapEstimate& map) {
  if (!path) return nullptr;
  require_file(*path);
  return load_posterior(*path, map);
}

}  // namespace

void cmd_predict(const PredictOptions& o, Manifest& m) {
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  const auto post = maybe_posterior(o.posterior, ckpt.map);
  const Evaluation ev = evaluate_artifacts(ckpt, post.get(), o.data);
  io::write_text_atomic(o.out, predictions_csv(ev.pred));
  m.config()["checkpoint"] = o.checkpoint.string();
  m.config()["posterior"] = o.posterior ? json(o.posterior->string()) : json(nullptr);
  m.config()["data"] = o.data ? json(o.data->string()) : json("checkpoint test split");
  m.results()["points"] = ev.pred.size();
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  std::cout << "predictions: " << o.out.string() << " (" << ev.pred.size() << " points)\n";
}

void cmd_evaluate(const EvaluateOptions& o, Manifest& m) {
  if (o.checkpoint) {
    const Checkpoint ckpt = read_checkpoint(*o.checkpoint);
    const auto post = maybe_posterior(o.posterior, ckpt.map);
    const Evaluation ev = evaluate_artifacts(ckpt, post.get(), o.data);
    const json metrics = metrics_json(ev.pred, ev.data);
    fs::create_directories(o.out);
    io::write_text_atomic(o.out / "metrics.json", metrics.dump(2) + "\n");
    m.config()["checkpoint"] = o.checkpoint->string();
    m.config()["posterior"] = o.posterior ? json(o.posterior->string()) : json(nullptr);
    m.results() = metrics;
    m.add_output(o.out / "metrics.json");
    m.write(o.out / "manifest.json");
    for (const auto& [k, v] : metrics.items()) std::cout << k << " = " << v.dump() << '\n';
    return;
  }
  if (!o.data) throw UsageError("evaluate needs --checkpoint (artifact mode) or --data (comparison)");
  require_file(*o.data);
  std::vector<MethodConfig> methods;
  for (const auto& token : split_list(o.methods)) methods.push_back(parse_method(token, o.seed));
  if (methods.empty()) throw UsageError("--methods is empty");

  TabularExperimentConfig cfg;
  cfg.dataset_name = o.data->stem().string();
  cfg.data = load_csv(*o.data, CsvSchema{o.targets, Task::kRegression});
  cfg.arch = make_architecture(cfg.data.input_dim(), cfg.data.output_dim(), o.arch.widths,
                               o.arch.hidden, o.arch.layers);
  cfg.standard_splits = o.splits;
  cfg.gap_splits = !o.no_gap;
  cfg.max_gap_splits = o.max_gap_splits;
  cfg.methods = methods;
  cfg.grid = parse_grid(o.grid);
  cfg.include_biases = o.include_biases;
  cfg.train = o.train;
  cfg.train.patience = std::min(cfg.train.patience, cfg.train.max_epochs);
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  const ExperimentResult r = run_tabular_experiment(cfg);
  write_experiment(r, o.out, m, {"test_ll", "test_rmse"});

  m.config()["data"] = o.data->string();
  m.config()["architecture"] = to_json(cfg.arch);
  m.config()["train"] = to_json(cfg.train);
  m.config()["methods"] = methods_json(methods);
  m.config()["grid"] = cfg.grid;
  m.config()["standard_splits"] = cfg.standard_splits;
  m.config()["gap_splits"] = cfg.gap_splits;
  m.config()["seed"] = o.seed;
  m.write(o.out / "manifest.json");
  print_summary(r, methods, "test_ll");
}

void cmd_reproduce(const ReproduceOptions& o, Manifest& m) {
  fs::create_directories(o.out);
  m.config()["experiment"] = o.experiment;
  m.config()["seed"] = o.seed;
  m.config()["quick"] = o.quick;
  if (o.experiment == "toy1d") {
    ToyExperimentConfig cfg;
    cfg.seed = o.seed;
    cfg.dead_filter = o.dead_filter;
    if (o.quick) cfg.random_seeds = 2;
    const ToyReport r = run_toy_experiment(cfg);
    io::write_text_atomic(o.out / "toy_summary.csv", toy_summary_csv(r));
    io::write_text_atomic(o.out / "toy_series.csv", toy_series_csv(r));
    m.add_output(o.out / "toy_summary.csv");
    m.add_output(o.out / "toy_series.csv");
    m.config()["architecture"] = to_json(cfg.arch);
    m.config()["lambda"] = cfg.lambda;
    m.config()["fractions"] = cfg.fractions;
    m.config()["random_seeds"] = cfg.random_seeds;
    m.config()["dead_filter"] = cfg.dead_filter;
    m.config()["train"] = to_json(cfg.train);
    std::printf("%-14s %6s %10s %16s\n", "method", "S", "lambda_S", "in-between std");
    for (const auto& mr : r.methods) {
      if (mr.label.find('#') != std::string::npos) continue;
      std::printf("%-14s %6zu %10.4g %16.4f\n", mr.label.c_str(), mr.s, mr.lambda_used,
                  mr.in_between_std);
    }
  } else if (o.experiment == "two-moons") {
    ClassificationExperimentConfig cfg;
    cfg.seed = o.seed;
    cfg.train.task = Task::kClassification;
    cfg.methods = {map_method(),
                   full_method(),
                   diagonal_method(),
                   final_layer_method(),
                   subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.1),
                   subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.03),
                   subnetwork_method(SelectionStrategy::kRandom, 0.1, derive_seed(o.seed, "select"))};
    if (o.quick) {
      cfg.arch = MlpArchitecture{2, {20, 20}, 2};
      cfg.train.max_epochs = 300;
      cfg.train.patience = 100;
      cfg.train.learning_rate = 1e-2;
    }
    const ExperimentResult r = run_two_moons_experiment(cfg);
    write_experiment(r, o.out, m, {"test_ll", "test_error", "test_ece", "test_brier"});
    m.config()["architecture"] = to_json(cfg.arch);
    m.config()["methods"] = methods_json(cfg.methods);
    m.config()["train"] = to_json(cfg.train);
    print_summary(r, cfg.methods, "test_ll");
  } else if (o.experiment == "tabular") {
    TabularExperimentConfig cfg;
    if (o.data) {
      require_file(*o.data);
      cfg.data = load_csv(*o.data, CsvSchema{});
      cfg.dataset_name = o.data->stem().string();
      cfg.arch.input_dim = cfg.data.input_dim();
    } else {
      cfg.data = make_synthetic_tabular();
    }
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    cfg.methods = {map_method(),
                   full_method(),
                   diagonal_method(),
                   final_layer_method(),
                   subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.5),
                   subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.25),
                   subnetwork_method(SelectionStrategy::kWassersteinDiag, 0.1),
                   subnetwork_method(SelectionStrategy::kRandom, 0.25, derive_seed(o.seed, "select"))};
    if (o.quick) {
      cfg.standard_splits = 2;
      cfg.max_gap_splits = 2;
      cfg.train.max_epochs = 200;
      cfg.train.patience = 50;
      cfg.train.learning_rate = 1e-2;
    }
    if (o.splits) cfg.standard_splits = *o.splits;
    const ExperimentResult r = run_tabular_experiment(cfg);
    write_experiment(r, o.out, m, {"test_ll", "test_rmse"});
    m.config()["dataset"] = cfg.dataset_name;
    m.config()["architecture"] = to_json(cfg.arch);
    m.config()["methods"] = methods_json(cfg.methods);
    m.config()["grid"] = cfg.grid;
    m.config()["standard_splits"] = cfg.standard_splits;
    m.config()["train"] = to_json(cfg.train);
    print_summary(r, cfg.methods, "test_ll");
  } else {
    throw UsageError("unknown experiment '" + o.experiment + "' (toy1d, two-moons, tabular)");
  }
  m.write(o.out / "manifest.json");
}

void cmd_generate(const GenerateOptions& o, Manifest& m) {
  Dataset d;
  if (o.dataset == "toy1d") {
    d = make_toy_1d(o.n.value_or(50), o.noise.value_or(0.1), o.seed);
  } else if (o.dataset == "two-moons") {
    d = make_two_moons(o.n.value_or(200), o.noise.value_or(0.15), o.seed);
  } else if (o.dataset == "synthetic-wine") {
    if (o.noise) std::cerr << "warning: --noise is ignored for synthetic-wine\n";
    d = make_synthetic_tabular(o.n.value_or(1599), 11, o.seed);
  } else {
    throw UsageError("unknown --dataset '" + o.dataset + "' (toy1d, two-moons, synthetic-wine)");
  }
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  save_csv(d, o.out);
  m.config()["dataset"] = o.dataset;
  m.config()["n"] = o.n ? json(*o.n) : json(nullptr);
  m.config()["noise"] = o.noise ? json(*o.noise) : json(nullptr);
  m.config()["seed"] = o.seed;
  m.results()["rows"] = d.size();
  m.add_output(o.out);
  m.write(manifest_path_for(o.out));
  std::cout << "data: " << o.out.string() << " (" << d.size() << " rows)\n";
}

}  // namespace sublaplace::cli

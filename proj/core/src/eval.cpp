#include "sublaplace/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "sublaplace/io.hpp"
#include "sublaplace/linalg.hpp"

namespace sublaplace {
namespace {

void require_task(const Predictive& pred, const Dataset& data, Task task) {
  if (pred.task != task || data.task != task) {
    throw Error(ErrorCode::kTaskMismatch, std::string("metric needs task ") +
                                              std::string(to_string(task)));
  }
  if (pred.size() != data.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction count differs from dataset size");
  }
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "metric over an empty dataset");
}

void require_match(const Predictive& pred, const Dataset& data) {
  if (pred.task != data.task) throw Error(ErrorCode::kTaskMismatch, "prediction/data task differ");
  if (pred.size() != data.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction count differs from dataset size");
  }
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "metric over an empty dataset");
}

double gaussian_log_density(const Vector& y, const Vector& mean, const Matrix& cov) {
  const auto f = linalg::cholesky(cov);
  const Vector r = y - mean;
  const double o = static_cast<double>(y.size());
  return -0.5 * (o * std::log(2.0 * std::numbers::pi) + linalg::log_det(f) +
                 linalg::quad_form(f, r));
}

Index argmax(const Eigen::Ref<const Vector>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double mean_of(const Vector& v) {
  return linalg::pairwise_sum(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))) /
         static_cast<double>(v.size());
}

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

std::vector<double> default_lambda_grid() {
  return {0.0001, 0.001, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0};
}

Vector pointwise_log_likelihood(const Predictive& pred, const Dataset& data) {
  require_match(pred, data);
  Vector ll(static_cast<Index>(data.size()));
  if (pred.task == Task::kRegression) {
    for (Index i = 0; i < ll.size(); ++i) {
      ll[i] = gaussian_log_density(data.targets.row(i).transpose(), pred.mean.row(i).transpose(),
                                   pred.covariance[static_cast<std::size_t>(i)]);
    }
  } else {
    for (Index i = 0; i < ll.size(); ++i) {
      const double p = pred.probabilities(i, data.labels[static_cast<std::size_t>(i)]);
      ll[i] = std::log(std::max(p, kProbabilityFloor));
    }
  }
  return ll;
}

double log_likelihood(const Predictive& pred, const Dataset& data) {
  return mean_of(pointwise_log_likelihood(pred, data));
}

double rmse(const Predictive& pred, const Dataset& data) {
  require_task(pred, data, Task::kRegression);
  const Vector sq = (pred.mean - data.targets).rowwise().squaredNorm();
  return std::sqrt(mean_of(sq) / static_cast<double>(pred.mean.cols()));
}

double error_rate(const Predictive& pred, const Dataset& data) {
  require_task(pred, data, Task::kClassification);
  std::size_t wrong = 0;
  for (Index i = 0; i < pred.probabilities.rows(); ++i) {
    if (argmax(pred.probabilities.row(i).transpose()) != data.labels[static_cast<std::size_t>(i)]) {
      ++wrong;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

double ece(const Predictive& pred, const Dataset& data, std::size_t n_bins) {
  require_task(pred, data, Task::kClassification);
  if (n_bins < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one bin");
  std::vector<double> conf_sum(n_bins, 0.0);
  std::vector<double> acc_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (Index i = 0; i < pred.probabilities.rows(); ++i) {
    const Vector p = pred.probabilities.row(i).transpose();
    const Index k = argmax(p);
    const double conf = p[k];
    const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(conf * static_cast<double>(n_bins)));
    conf_sum[bin] += conf;
    acc_sum[bin] += k == data.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    ++count[bin];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    total += std::abs(acc_sum[b] - conf_sum[b]);
  }
  return total / static_cast<double>(data.size());
}

double brier(const Predictive& pred, const Dataset& data) {
  require_task(pred, data, Task::kClassification);
  Vector per(pred.probabilities.rows());
  for (Index i = 0; i < per.size(); ++i) {
    Vector d = pred.probabilities.row(i).transpose();
    d[data.labels[static_cast<std::size_t>(i)]] -= 1.0;
    per[i] = d.squaredNorm();
  }
  return mean_of(per);
}

Predictive destandardize(const Predictive& pred, const Standardizer& s) {
  if (pred.task != Task::kRegression || s.target_std.size() == 0) return pred;
  if (s.target_std.size() != pred.mean.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "standardizer does not match output width");
  }
  Predictive out = pred;
  out.mean = (pred.mean.array().rowwise() * s.target_std.transpose().array()).rowwise() +
             s.target_mean.transpose().array();
  out.epistemic_variance =
      pred.epistemic_variance.array().rowwise() * s.target_std.array().square().transpose();
  for (auto& c : out.covariance) c = s.target_std.asDiagonal() * c * s.target_std.asDiagonal();
  return out;
}

double ensemble_log_likelihood(const std::vector<Predictive>& members, const Dataset& data) {
  if (members.empty()) throw Error(ErrorCode::kInvalidArgument, "empty ensemble");
  std::vector<Vector> member_ll;
  for (const auto& m : members) member_ll.push_back(pointwise_log_likelihood(m, data));
  Vector ll(static_cast<Index>(data.size()));
  const double log_k = std::log(static_cast<double>(members.size()));
  std::vector<double> terms(members.size());
  for (Index i = 0; i < ll.size(); ++i) {
    if (data.task == Task::kClassification) {
      double p = 0.0;
      for (const auto& m : members) p += m.probabilities(i, data.labels[static_cast<std::size_t>(i)]);
      ll[i] = std::log(std::max(p / static_cast<double>(members.size()), kProbabilityFloor));
    } else {
      for (std::size_t k = 0; k < members.size(); ++k) terms[k] = member_ll[k][i];
      ll[i] = logsumexp(terms) - log_k;
    }
  }
  return mean_of(ll);
}

bool MethodConfig::needs_full_curvature() const {
  return kind == MethodKind::kFull || kind == MethodKind::kFinalLayer ||
         (kind == MethodKind::kSubnetwork && strategy == SelectionStrategy::kWassersteinExact);
}

CurvatureCache build_curvature(const MapEstimate& map, const Dataset& train, bool include_biases,
                               bool with_full) {
  CurvatureCache c;
  c.total = map.weights.layout().eligible_count(include_biases);
  const SubnetworkMask all = SubnetworkMask::full(c.total);
  c.stack = build_jacobian_stack(map, train, all.selected());
  c.diagonal = compute_ggn(c.stack, all, GgnKind::kDiagonal, 1.0);
  if (with_full) c.full = compute_ggn(c.stack, all, GgnKind::kFull, 1.0);
  return c;
}

FittedMethod fit_method(const MapEstimate& map, const CurvatureCache& curvature,
                        const MethodConfig& config, double lambda) {
  FittedMethod fm;
  fm.config = config;
  fm.lambda = lambda;
  fm.lambda_used = lambda;
  if (config.kind == MethodKind::kMap) return fm;
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "prior precision must be > 0");
  const std::size_t total = curvature.total;
  if (config.needs_full_curvature() && !curvature.full) {
    throw Error(ErrorCode::kMissingCurvature, "method '" + config.label + "' needs the full GGN");
  }
  const SubnetworkMask all = SubnetworkMask::full(total);
  switch (config.kind) {
    case MethodKind::kFull: {
      fm.mask = all;
      fm.posterior = std::make_shared<GaussianPosterior>(
          build_posterior(curvature.full->with_prior_precision(lambda), map, all));
      break;
    }
    case MethodKind::kDiagonal: {
      fm.mask = all;
      fm.posterior = std::make_shared<DiagonalPosterior>(
          build_diagonal_posterior(curvature.diagonal.with_prior_precision(lambda)));
      break;
    }
    case MethodKind::kFinalLayer: {
      const auto full = build_posterior(curvature.full->with_prior_precision(lambda), map, all);
      SubnetworkMask last = select_final_layer(map.architecture(), config.include_biases);
      fm.posterior = std::make_shared<GaussianPosterior>(marginalize(full, last));
      fm.mask = std::move(last);
      break;
    }
    case MethodKind::kSubnetwork: {
      const std::size_t s = config.size > 0 ? config.size : size_from_fraction(config.fraction, total);
      std::optional<GgnMatrix> source;
      if (config.strategy == SelectionStrategy::kWassersteinExact) {
        source = curvature.full->with_prior_precision(lambda);
      } else if (config.strategy == SelectionStrategy::kWassersteinDiag) {
        source = curvature.diagonal.with_prior_precision(lambda);
      }
      const SelectionScores scores =
          score_weights(config.strategy, map, source ? &*source : nullptr, total);
      SelectOptions opts;
      opts.seed = config.selection_seed;
      opts.include_biases = config.include_biases;
      if (config.dead_filter) {
        opts.excluded = dead_weight_filter(curvature.diagonal.data_diagonal, config.dead_threshold);
      }
      SubnetworkMask mask = select_subnetwork(scores, s, map.architecture(), opts);
      fm.lambda_used = config.rescale_prior ? rescale_prior(lambda, mask.size(), total) : lambda;
      const GgnMatrix ggn = compute_ggn(curvature.stack, mask, GgnKind::kSubnetwork, fm.lambda_used);
      fm.posterior = std::make_shared<GaussianPosterior>(build_posterior(ggn, map, mask));
      fm.mask = std::move(mask);
      break;
    }
    case MethodKind::kMap:
      break;
  }
  return fm;
}

GridSearchResult grid_search_lambda(const MapEstimate& map, const CurvatureCache& curvature,
                                    const Dataset& val, const MethodConfig& config,
                                    std::vector<double> grid) {
  if (val.empty()) throw Error(ErrorCode::kEmptyValidation, "lambda search needs validation data");
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty lambda grid");
  std::sort(grid.begin(), grid.end());
  GridSearchResult result;
  result.grid = grid;
  double best = -std::numeric_limits<double>::infinity();
  std::optional<Error> last_error;
  for (double lambda : grid) {
    double ll = -std::numeric_limits<double>::infinity();
    try {
      FittedMethod fm = fit_method(map, curvature, config, lambda);
      ll = log_likelihood(predict(map, fm.posterior.get(), val.inputs), val);
      if (std::isfinite(ll) && ll > best) {
        best = ll;
        result.best_lambda = lambda;
        result.fitted = std::move(fm);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotPositiveDefinite) throw;
      last_error = e;
    }
    result.val_log_likelihood.push_back(ll);
  }
  if (!std::isfinite(best)) {
    if (last_error) throw *last_error;
    throw Error(ErrorCode::kInvalidArgument, "no lambda gave a finite validation likelihood");
  }
  return result;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  a.mean = linalg::pairwise_sum(values) / static_cast<double>(values.size());
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - a.mean) * (v - a.mean));
  a.std = std::sqrt(linalg::pairwise_sum(sq) / static_cast<double>(values.size()));
  return a;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "dataset,split,seed,method,S,lambda,metric,value\n";
  for (const auto& r : rows) {
    os << r.dataset << ',' << r.split << ',' << r.seed << ',' << r.method << ',' << r.s << ','
       << io::format_double(r.lambda) << ',' << r.metric << ',' << io::format_double(r.value)
       << '\n';
  }
  return os.str();
}

std::map<std::string, Aggregate> summarize(const std::vector<MetricRow>& rows) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : rows) {
    const std::string kind = r.split.substr(0, r.split.find(':'));
    groups[r.dataset + "|" + kind + "|" + r.method + "|" + r.metric].push_back(r.value);
  }
  std::map<std::string, Aggregate> out;
  for (const auto& [key, values] : groups) out[key] = aggregate(values);
  return out;
}

std::size_t worker_count_from_env() {
  const char* env = std::getenv("SUBLAPLACE_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    throw Error(ErrorCode::kInvalidArgument, "SUBLAPLACE_WORKERS must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers) {
  if (workers == 0) workers = worker_count_from_env();
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sublaplace

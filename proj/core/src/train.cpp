#include "sublaplace/train.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sublaplace/io.hpp"
#include "sublaplace/rng.hpp"

namespace sublaplace {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct BatchTerms {
  double nll_sum = 0.0;
  Matrix upstream;  // dNLL/df, N x O
  double grad_noise_sum = 0.0;
};

BatchTerms nll_terms(const Matrix& outputs, double noise_log_variance, const Dataset& data) {
  BatchTerms t;
  t.upstream.resize(outputs.rows(), outputs.cols());
  if (data.task == Task::kRegression) {
    const double inv_var = std::exp(-noise_log_variance);
    const Matrix resid = outputs - data.targets;
    t.upstream = resid * inv_var;
    const double sq = resid.squaredNorm();
    const double count = static_cast<double>(resid.size());
    t.nll_sum = count * (kHalfLog2Pi + 0.5 * noise_log_variance) + 0.5 * sq * inv_var;
    t.grad_noise_sum = 0.5 * count - 0.5 * sq * inv_var;
  } else {
    for (Index i = 0; i < outputs.rows(); ++i) {
      const Vector logits = outputs.row(i).transpose();
      const double m = logits.maxCoeff();
      const Vector e = (logits.array() - m).exp();
      const double z = e.sum();
      const int label = data.labels[static_cast<std::size_t>(i)];
      t.nll_sum += -(logits[label] - m - std::log(z));
      Vector p = e / z;
      p[label] -= 1.0;
      t.upstream.row(i) = p.transpose();
    }
  }
  return t;
}

void require_task(const Dataset& data, Task task) {
  if (data.task != task) {
    throw Error(ErrorCode::kTaskMismatch, "dataset task does not match training task");
  }
}

Dataset gather_rows(const Dataset& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                order.begin() + static_cast<std::ptrdiff_t>(end));
  return data.subset(rows);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "weight_decay must be >= 0");
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (max_epochs == 0) throw Error(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (patience > max_epochs) {
    throw Error(ErrorCode::kInvalidArgument, "patience must not exceed max_epochs");
  }
}

double mean_nll(const WeightVector& w, double noise_log_variance, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "mean_nll on empty dataset");
  const Matrix out = forward_batch(w, data.inputs);
  return nll_terms(out, noise_log_variance, data).nll_sum / static_cast<double>(data.size());
}

ObjectiveValue training_objective(const WeightVector& w, double noise_log_variance,
                                  const Dataset& batch, double weight_decay) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  ForwardTrace trace;
  const Matrix out = forward_batch(w, batch.inputs, &trace);
  BatchTerms t = nll_terms(out, noise_log_variance, batch);
  const double n = static_cast<double>(batch.size());
  ObjectiveValue r;
  r.value = t.nll_sum / n + 0.5 * weight_decay * w.values().squaredNorm();
  r.grad_weights = backward_batch(w, trace, t.upstream / n) + weight_decay * w.values();
  r.grad_noise_log_variance = batch.task == Task::kRegression ? t.grad_noise_sum / n : 0.0;
  return r;
}

ObjectiveValue negative_log_posterior(const WeightVector& w, double noise_log_variance,
                                      const Dataset& data, double prior_precision) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "empty dataset");
  ForwardTrace trace;
  const Matrix out = forward_batch(w, data.inputs, &trace);
  BatchTerms t = nll_terms(out, noise_log_variance, data);
  const double p = static_cast<double>(w.size());
  ObjectiveValue r;
  r.value = t.nll_sum + 0.5 * prior_precision * w.values().squaredNorm() +
            p * kHalfLog2Pi - 0.5 * p * std::log(prior_precision);
  r.grad_weights = backward_batch(w, trace, t.upstream) + prior_precision * w.values();
  r.grad_noise_log_variance = data.task == Task::kRegression ? t.grad_noise_sum : 0.0;
  return r;
}

MapEstimate train_map(const MlpArchitecture& arch, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  require_task(train, cfg.task);
  if (arch.input_dim != train.input_dim() || arch.output_dim != train.output_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "architecture does not match dataset dims");
  }
  const bool has_val = !val.empty();
  if (has_val) require_task(val, cfg.task);
  if (!has_val && cfg.patience < cfg.max_epochs) {
    throw Error(ErrorCode::kEmptyValidation,
                "early stopping (patience < max_epochs) needs a validation set");
  }

  WeightVector w = WeightVector::initialize(arch, cfg.seed);
  double noise = cfg.initial_noise_log_variance;
  Vector velocity = Vector::Zero(static_cast<Index>(w.size()));
  double noise_velocity = 0.0;

  MapEstimate best{w, cfg.task, noise, {}, {}, cfg.seed, 0};
  double best_val = std::numeric_limits<double>::infinity();

  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  const std::uint64_t shuffle_key = derive_seed(cfg.seed, "shuffle");

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_seed(shuffle_key, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const Dataset batch = gather_rows(train, order, start, end);
      const ObjectiveValue obj = training_objective(w, noise, batch, cfg.weight_decay);
      if (!std::isfinite(obj.value) || !obj.grad_weights.allFinite()) {
        throw Error(ErrorCode::kDivergedTraining,
                    "loss became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += (obj.value - 0.5 * cfg.weight_decay * w.values().squaredNorm()) *
                  static_cast<double>(end - start);
      velocity = cfg.momentum * velocity + obj.grad_weights;
      Vector next = w.values() - cfg.learning_rate * velocity;
      if (!next.allFinite()) {
        throw Error(ErrorCode::kDivergedTraining,
                    "weights became non-finite at epoch " + std::to_string(epoch));
      }
      w.mutable_values() = std::move(next);
      if (cfg.task == Task::kRegression) {
        noise_velocity = cfg.momentum * noise_velocity + obj.grad_noise_log_variance;
        noise -= cfg.learning_rate * noise_velocity;
      }
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n),
                    std::numeric_limits<double>::quiet_NaN()};
    if (has_val) {
      rec.val_loss = mean_nll(w, noise, val);
      if (!std::isfinite(rec.val_loss)) {
        throw Error(ErrorCode::kDivergedTraining,
                    "validation loss non-finite at epoch " + std::to_string(epoch));
      }
      best.val_metric_history.push_back(rec.val_loss);
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best.weights = w;
        best.noise_log_variance = noise;
        best.best_epoch = epoch;
      }
    }
    best.curve.push_back(rec);
    if (has_val && epoch - best.best_epoch >= cfg.patience) break;
  }
  if (!has_val) {
    best.weights = w;
    best.noise_log_variance = noise;
    best.best_epoch = best.curve.size();
  }
  return best;
}

std::vector<MapEstimate> train_ensemble(const MlpArchitecture& arch, const Dataset& train,
                                        const Dataset& val, const TrainConfig& cfg,
                                        std::size_t n_members) {
  if (n_members == 0) throw Error(ErrorCode::kInvalidArgument, "n_members must be >= 1");
  std::vector<MapEstimate> members;
  for (std::size_t k = 0; k < n_members; ++k) {
    TrainConfig member_cfg = cfg;
    if (k > 0) member_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    members.push_back(train_map(arch, train, val, member_cfg));
  }
  return members;
}

std::string curve_csv(const MapEstimate& map) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : map.curve) {
    out << r.epoch << "," << io::format_double(r.train_loss) << ","
        << (std::isnan(r.val_loss) ? std::string() : io::format_double(r.val_loss)) << "\n";
  }
  return out.str();
}

}  // namespace sublaplace

#include "sublaplace/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sublaplace/io.hpp"

namespace sublaplace {
namespace {

constexpr Index kChunkPoints = 128;

// diag blocks of J Sigma J^T for all inputs, chunked to bound memory.
std::vector<Matrix> epistemic_blocks(const MapEstimate& map, const Posterior& posterior,
                                     const Matrix& inputs) {
  const Index o = static_cast<Index>(map.architecture().output_dim);
  const Index n = inputs.rows();
  if (posterior.mask().total() > map.weights.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "posterior mask exceeds model parameters");
  }
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(n));
  for (Index p0 = 0; p0 < n; p0 += kChunkPoints) {
    const Index rows = std::min(kChunkPoints, n - p0);
    const Matrix jac = stacked_jacobian(map.weights, inputs.middleRows(p0, rows),
                                        posterior.mask().indices());
    const Matrix sigma = posterior.linearized_variance(jac);
    for (Index i = 0; i < rows; ++i) blocks.push_back(sigma.block(i * o, i * o, o, o));
  }
  return blocks;
}

void check_inputs(const MapEstimate& map, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != map.architecture().input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "input width does not match architecture");
  }
}

}  // namespace

Matrix Predictive::predictive_std() const {
  Matrix out(mean.rows(), mean.cols());
  for (Index i = 0; i < mean.rows(); ++i) {
    out.row(i) = covariance[static_cast<std::size_t>(i)].diagonal().cwiseSqrt().transpose();
  }
  return out;
}

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Matrix linearized_variance(const Posterior& posterior, const Jacobian& jac_s) {
  const auto sel = posterior.mask().indices();
  if (jac_s.columns.size() != sel.size() ||
      !std::equal(jac_s.columns.begin(), jac_s.columns.end(), sel.begin())) {
    throw Error(ErrorCode::kIndexMapMismatch, "Jacobian columns do not match posterior mask");
  }
  return posterior.linearized_variance(jac_s.matrix);
}

Predictive predict_regression(const MapEstimate& map, const Posterior* posterior,
                              const Matrix& inputs) {
  if (map.task != Task::kRegression) {
    throw Error(ErrorCode::kTaskMismatch, "predict_regression on a classification model");
  }
  check_inputs(map, inputs);
  Predictive pred;
  pred.task = Task::kRegression;
  pred.mean = forward_batch(map.weights, inputs);
  const Index o = pred.mean.cols();
  const double sigma2 = map.noise_variance();
  pred.epistemic_variance = Matrix::Zero(pred.mean.rows(), o);
  std::vector<Matrix> blocks;
  if (posterior != nullptr) blocks = epistemic_blocks(map, *posterior, inputs);
  pred.covariance.reserve(static_cast<std::size_t>(pred.mean.rows()));
  for (Index i = 0; i < pred.mean.rows(); ++i) {
    Matrix cov = Matrix::Zero(o, o);
    if (posterior != nullptr) {
      cov = blocks[static_cast<std::size_t>(i)];
      pred.epistemic_variance.row(i) = cov.diagonal().transpose();
    }
    cov.diagonal().array() += sigma2;
    pred.covariance.push_back(std::move(cov));
  }
  return pred;
}

Predictive predict_classification(const MapEstimate& map, const Posterior* posterior,
                                  const Matrix& inputs) {
  if (map.task != Task::kClassification) {
    throw Error(ErrorCode::kTaskMismatch, "predict_classification on a regression model");
  }
  check_inputs(map, inputs);
  Predictive pred;
  pred.task = Task::kClassification;
  pred.mean = forward_batch(map.weights, inputs);
  const Index c = pred.mean.cols();
  pred.epistemic_variance = Matrix::Zero(pred.mean.rows(), c);
  std::vector<Matrix> blocks;
  if (posterior != nullptr) blocks = epistemic_blocks(map, *posterior, inputs);
  pred.probabilities.resize(pred.mean.rows(), c);
  for (Index i = 0; i < pred.mean.rows(); ++i) {
    Vector logits = pred.mean.row(i).transpose();
    if (posterior != nullptr) {
      const Vector var = blocks[static_cast<std::size_t>(i)].diagonal().cwiseMax(0.0);
      pred.epistemic_variance.row(i) = var.transpose();
      logits.array() /= (1.0 + std::numbers::pi / 8.0 * var.array()).sqrt();
    }
    pred.probabilities.row(i) = softmax(logits).transpose();
  }
  return pred;
}

Predictive predict(const MapEstimate& map, const Posterior* posterior, const Matrix& inputs) {
  return map.task == Task::kRegression ? predict_regression(map, posterior, inputs)
                                       : predict_classification(map, posterior, inputs);
}

Matrix sample_posterior_predictive(const MapEstimate& map, const Posterior& posterior,
                                   const Vector& x, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
  const Vector f = forward(map.weights, x);
  const Jacobian jac = jacobian(map.weights, x, posterior.mask().indices());
  const Matrix proj = posterior.sample_projection(jac.matrix);
  CounterRng rng(derive_seed(seed, "predictive"));
  Matrix out(static_cast<Index>(n_samples), f.size());
  Vector z(proj.rows());
  for (Index s = 0; s < out.rows(); ++s) {
    for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    out.row(s) = (f + proj.transpose() * z).transpose();
  }
  return out;
}

Vector mc_softmax(const MapEstimate& map, const Posterior& posterior, const Vector& x,
                  std::size_t n_samples, std::uint64_t seed) {
  const Matrix draws = sample_posterior_predictive(map, posterior, x, n_samples, seed);
  Vector acc = Vector::Zero(draws.cols());
  for (Index s = 0; s < draws.rows(); ++s) acc += softmax(draws.row(s).transpose());
  return acc / static_cast<double>(draws.rows());
}

std::string predictions_csv(const Predictive& pred) {
  std::ostringstream os;
  const bool reg = pred.task == Task::kRegression;
  const Index k = reg ? pred.mean.cols() : pred.probabilities.cols();
  os << "id";
  for (Index j = 0; j < k; ++j) os << (reg ? ",mean_" : ",prob_") << j;
  if (reg) {
    for (Index j = 0; j < k; ++j) os << ",std_" << j;
  }
  os << '\n';
  const Matrix sd = reg ? pred.predictive_std() : Matrix();
  for (Index i = 0; i < static_cast<Index>(pred.size()); ++i) {
    os << i;
    for (Index j = 0; j < k; ++j) {
      os << ',' << io::format_double(reg ? pred.mean(i, j) : pred.probabilities(i, j));
    }
    if (reg) {
      for (Index j = 0; j < k; ++j) os << ',' << io::format_double(sd(i, j));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace sublaplace

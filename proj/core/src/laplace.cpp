#include "sublaplace/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sublaplace {
namespace {

constexpr Index kBlockPoints = 32;

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// Position of each mask index within the stack's column list.
std::vector<Index> column_positions(const JacobianStack& stack, const SubnetworkMask& mask) {
  std::vector<Index> pos;
  pos.reserve(mask.size());
  for (std::size_t idx : mask.selected()) {
    auto it = std::lower_bound(stack.columns.begin(), stack.columns.end(), idx);
    if (it == stack.columns.end() || *it != idx) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "mask index " + std::to_string(idx) + " not covered by Jacobian stack");
    }
    pos.push_back(static_cast<Index>(it - stack.columns.begin()));
  }
  return pos;
}

Matrix gather_columns(const Matrix& m, Index row0, Index rows, const std::vector<Index>& cols,
                      bool contiguous) {
  if (contiguous) return m.block(row0, cols.front(), rows, static_cast<Index>(cols.size()));
  Matrix out(rows, static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(static_cast<Index>(k)) = m.block(row0, cols[k], rows, 1);
  }
  return out;
}

}  // namespace

Matrix likelihood_hessian(Task task, const Vector& output, std::optional<double> noise_variance) {
  const Index o = output.size();
  if (task == Task::kRegression) {
    if (!noise_variance || !(*noise_variance > 0.0) || !std::isfinite(*noise_variance)) {
      throw Error(ErrorCode::kInvalidNoiseVariance, "regression needs noise variance > 0");
    }
    return Matrix::Identity(o, o) / *noise_variance;
  }
  const Vector p = softmax(output);
  Matrix h = -p * p.transpose();
  h.diagonal() += p;
  return h;
}

JacobianStack build_jacobian_stack(const MapEstimate& map, const Dataset& data,
                                   std::span<const std::size_t> columns) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "GGN needs at least one datapoint");
  if (data.task != map.task) throw Error(ErrorCode::kTaskMismatch, "dataset/model task differ");
  if (!std::is_sorted(columns.begin(), columns.end())) {
    throw Error(ErrorCode::kInvalidArgument, "stack columns must be sorted");
  }
  JacobianStack s;
  s.task = map.task;
  s.outputs = map.architecture().output_dim;
  s.points = data.size();
  s.columns.assign(columns.begin(), columns.end());
  s.jac = stacked_jacobian(map.weights, data.inputs, columns);
  const Index o = static_cast<Index>(s.outputs);
  if (s.task == Task::kRegression) {
    s.hess_jac = s.jac / map.noise_variance();
  } else {
    const Matrix outputs = forward_batch(map.weights, data.inputs);
    s.hess_jac.resize(s.jac.rows(), s.jac.cols());
    for (Index n = 0; n < outputs.rows(); ++n) {
      const Matrix h = likelihood_hessian(Task::kClassification, outputs.row(n).transpose());
      s.hess_jac.middleRows(n * o, o) = h * s.jac.middleRows(n * o, o);
    }
  }
  return s;
}

Matrix GgnMatrix::precision() const {
  if (kind == GgnKind::kDiagonal) {
    return precision_diagonal().asDiagonal();
  }
  Matrix p = data_term;
  p.diagonal().array() += prior_precision;
  return p;
}

Vector GgnMatrix::precision_diagonal() const {
  return data_diagonal.array() + prior_precision;
}

GgnMatrix GgnMatrix::with_prior_precision(double lambda) const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "prior precision must be > 0");
  GgnMatrix g = *this;
  g.prior_precision = lambda;
  return g;
}

GgnMatrix compute_ggn(const JacobianStack& stack, const SubnetworkMask& mask, GgnKind kind,
                      double prior_precision) {
  if (!(prior_precision > 0.0) || !std::isfinite(prior_precision)) {
    throw Error(ErrorCode::kInvalidArgument, "prior precision must be > 0");
  }
  if (stack.points == 0) throw Error(ErrorCode::kEmptyDataset, "GGN needs datapoints");
  if (kind == GgnKind::kFull && !mask.is_full()) {
    throw Error(ErrorCode::kInvalidArgument, "full GGN requires a full mask");
  }
  const std::vector<Index> cols = column_positions(stack, mask);
  const bool contiguous = cols.back() - cols.front() + 1 == static_cast<Index>(cols.size());
  const Index o = static_cast<Index>(stack.outputs);
  const Index points = static_cast<Index>(stack.points);

  std::vector<Matrix> dense_blocks;
  std::vector<Matrix> diag_blocks;
  for (Index p0 = 0; p0 < points; p0 += kBlockPoints) {
    const Index rows = std::min(kBlockPoints, points - p0) * o;
    const Matrix j = gather_columns(stack.jac, p0 * o, rows, cols, contiguous);
    const Matrix hj = gather_columns(stack.hess_jac, p0 * o, rows, cols, contiguous);
    if (kind == GgnKind::kDiagonal) {
      diag_blocks.push_back(j.cwiseProduct(hj).colwise().sum().transpose());
    } else {
      dense_blocks.push_back(j.transpose() * hj);
    }
  }

  GgnMatrix g;
  g.kind = kind;
  g.prior_precision = prior_precision;
  g.index_map = mask.selected();
  g.total = mask.total();
  if (kind == GgnKind::kDiagonal) {
    g.data_diagonal = linalg::pairwise_sum(diag_blocks).col(0);
  } else {
    Matrix sum = linalg::pairwise_sum(dense_blocks);
    g.data_term = 0.5 * (sum + sum.transpose());
    g.data_diagonal = g.data_term.diagonal();
  }
  return g;
}

GgnMatrix compute_ggn(const MapEstimate& map, const Dataset& data, const SubnetworkMask& mask,
                      GgnKind kind, double prior_precision) {
  const JacobianStack stack = build_jacobian_stack(map, data, mask.selected());
  return compute_ggn(stack, mask, kind, prior_precision);
}

double rescale_prior(double lambda_full, std::size_t s, std::size_t d) {
  if (s < 1 || s > d) {
    throw Error(ErrorCode::kInvalidSize, "need 1 <= S <= D, got S=" + std::to_string(s) +
                                             " D=" + std::to_string(d));
  }
  if (!(lambda_full > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be > 0");
  return lambda_full * static_cast<double>(s) / static_cast<double>(d);
}

GaussianPosterior::GaussianPosterior(SubnetworkMask mask, Vector mean,
                                     linalg::CholeskyFactor precision_factor,
                                     double prior_precision, double noise_variance,
                                     Vector map_weights)
    : mask_(std::move(mask)),
      mean_(std::move(mean)),
      factor_(std::move(precision_factor)),
      prior_precision_(prior_precision),
      noise_variance_(noise_variance),
      map_weights_(std::move(map_weights)) {
  if (static_cast<std::size_t>(mean_.size()) != mask_.size() ||
      static_cast<std::size_t>(factor_.dim()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "posterior mean/factor do not match mask");
  }
  if (static_cast<std::size_t>(map_weights_.size()) < mask_.total()) {
    throw Error(ErrorCode::kIndexMapMismatch, "MAP weights shorter than mask total");
  }
}

Matrix GaussianPosterior::covariance() const { return linalg::inverse(factor_); }

Vector GaussianPosterior::marginal_variances() const { return linalg::inverse_diagonal(factor_); }

Vector GaussianPosterior::complement_values() const {
  Vector out(map_weights_.size() - static_cast<Index>(mask_.size()));
  Index k = 0;
  for (Index i = 0; i < map_weights_.size(); ++i) {
    if (!mask_.contains(static_cast<std::size_t>(i))) out[k++] = map_weights_[i];
  }
  return out;
}

Vector GaussianPosterior::embed(const Vector& w_s) const {
  if (static_cast<std::size_t>(w_s.size()) != mask_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "subnetwork vector has wrong length");
  }
  Vector full = map_weights_;
  for (std::size_t k = 0; k < mask_.size(); ++k) {
    full[static_cast<Index>(mask_.selected()[k])] = w_s[static_cast<Index>(k)];
  }
  return full;
}

Matrix GaussianPosterior::linearized_variance(const Matrix& jac) const {
  if (static_cast<std::size_t>(jac.cols()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "Jacobian columns do not match posterior mask");
  }
  const Matrix v = linalg::solve_lower(factor_, jac.transpose());
  Matrix sigma = v.transpose() * v;
  return 0.5 * (sigma + sigma.transpose());
}

Vector GaussianPosterior::sample_offset(CounterRng& rng) const {
  Vector z(static_cast<Index>(mask_.size()));
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // H = L L^T  =>  L^{-T} z ~ N(0, H^{-1})
  return factor_.lower().transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix GaussianPosterior::sample_projection(const Matrix& jac) const {
  if (static_cast<std::size_t>(jac.cols()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "Jacobian columns do not match posterior mask");
  }
  // J L^{-T} z = (L^{-1} J^T)^T z
  return factor_.lower().triangularView<Eigen::Lower>().solve(jac.transpose());
}

DiagonalPosterior::DiagonalPosterior(SubnetworkMask mask, Vector variances)
    : mask_(std::move(mask)), variances_(std::move(variances)) {
  if (static_cast<std::size_t>(variances_.size()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "variances do not match mask");
  }
  if ((variances_.array() < 0.0).any() || !variances_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "variances must be finite and >= 0");
  }
}

Matrix DiagonalPosterior::linearized_variance(const Matrix& jac) const {
  if (static_cast<std::size_t>(jac.cols()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "Jacobian columns do not match posterior mask");
  }
  Matrix sigma = jac * variances_.asDiagonal() * jac.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Vector DiagonalPosterior::sample_offset(CounterRng& rng) const {
  Vector z(variances_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = std::sqrt(variances_[i]) * rng.normal();
  return z;
}

Matrix DiagonalPosterior::sample_projection(const Matrix& jac) const {
  if (static_cast<std::size_t>(jac.cols()) != mask_.size()) {
    throw Error(ErrorCode::kIndexMapMismatch, "Jacobian columns do not match posterior mask");
  }
  return variances_.cwiseSqrt().asDiagonal() * jac.transpose();
}

GaussianPosterior build_posterior(const GgnMatrix& ggn, const MapEstimate& map,
                                  const SubnetworkMask& mask) {
  if (ggn.kind == GgnKind::kDiagonal) {
    throw Error(ErrorCode::kInvalidArgument, "build_posterior needs a dense GGN");
  }
  if (ggn.index_map != mask.selected()) {
    throw Error(ErrorCode::kIndexMapMismatch, "GGN index map does not match mask");
  }
  const Vector& w = map.weights.values();
  if (mask.total() > static_cast<std::size_t>(w.size())) {
    throw Error(ErrorCode::kIndexMapMismatch, "mask total exceeds parameter count");
  }
  Vector mean(static_cast<Index>(mask.size()));
  for (std::size_t k = 0; k < mask.size(); ++k) {
    mean[static_cast<Index>(k)] = w[static_cast<Index>(mask.selected()[k])];
  }
  auto factor = linalg::cholesky(ggn.precision());
  const double sigma2 = map.task == Task::kRegression ? map.noise_variance() : 0.0;
  return GaussianPosterior(mask, std::move(mean), std::move(factor), ggn.prior_precision, sigma2, w);
}

GaussianPosterior marginalize(const GaussianPosterior& posterior, const SubnetworkMask& keep) {
  const auto& sel = posterior.mask().selected();
  std::vector<Index> pos;
  for (std::size_t idx : keep.selected()) {
    auto it = std::lower_bound(sel.begin(), sel.end(), idx);
    if (it == sel.end() || *it != idx) {
      throw Error(ErrorCode::kIndexMapMismatch, "marginal index not in posterior mask");
    }
    pos.push_back(static_cast<Index>(it - sel.begin()));
  }
  const Matrix cov = posterior.covariance();
  const Index k = static_cast<Index>(pos.size());
  Matrix block(k, k);
  Vector mean(k);
  for (Index a = 0; a < k; ++a) {
    mean[a] = posterior.mean()[pos[static_cast<std::size_t>(a)]];
    for (Index b = 0; b < k; ++b) {
      block(a, b) = cov(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
    }
  }
  const Matrix precision = linalg::inverse(linalg::cholesky(block));
  return GaussianPosterior(keep, std::move(mean), linalg::cholesky(precision),
                           posterior.prior_precision(), posterior.noise_variance(),
                           posterior.map_weights());
}

DiagonalPosterior build_diagonal_posterior(const GgnMatrix& ggn) {
  const SubnetworkMask mask(ggn.index_map, ggn.total);
  return DiagonalPosterior(mask, diag_marginal_variances(ggn));
}

Vector exact_marginal_variances(const GgnMatrix& ggn_full) {
  if (ggn_full.kind == GgnKind::kDiagonal) {
    throw Error(ErrorCode::kInvalidArgument, "exact marginal variances need a dense GGN");
  }
  return linalg::inverse_diagonal(linalg::cholesky(ggn_full.precision()));
}

Vector diag_marginal_variances(const GgnMatrix& ggn_diag) {
  const Vector d = ggn_diag.precision_diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) {
    throw Error(ErrorCode::kNonPositiveDiagonal, "diagonal GGN entries must be > 0");
  }
  return d.cwiseInverse();
}

}  // namespace sublaplace

#include "sublaplace/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sublaplace/linalg.hpp"
#include "sublaplace/rng.hpp"

namespace sublaplace {
namespace {

std::vector<std::size_t> candidates(std::size_t total, std::span<const std::size_t> excluded) {
  std::vector<bool> skip(total, false);
  for (std::size_t e : excluded) {
    if (e < total) skip[e] = true;
  }
  std::vector<std::size_t> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (!skip[i]) out.push_back(i);
  }
  return out;
}

void check_size(std::size_t s, std::size_t available) {
  if (s < 1 || s > available) {
    throw Error(ErrorCode::kInvalidSize, "subnetwork size " + std::to_string(s) +
                                             " not in [1, " + std::to_string(available) + "]");
  }
}

}  // namespace

std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kWassersteinExact: return "wass-exact";
    case SelectionStrategy::kWassersteinDiag: return "wass-diag";
    case SelectionStrategy::kRandom: return "random";
    case SelectionStrategy::kFinalLayer: return "final-layer";
    case SelectionStrategy::kMagnitude: return "magnitude";
  }
  return "unknown";
}

SelectionStrategy strategy_from_string(std::string_view name) {
  for (auto s : {SelectionStrategy::kWassersteinExact, SelectionStrategy::kWassersteinDiag,
                 SelectionStrategy::kRandom, SelectionStrategy::kFinalLayer,
                 SelectionStrategy::kMagnitude}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

SelectionScores score_weights(SelectionStrategy strategy, const MapEstimate& map,
                              const GgnMatrix* ggn, std::size_t total) {
  SelectionScores scores;
  scores.strategy = strategy;
  switch (strategy) {
    case SelectionStrategy::kWassersteinExact:
      if (ggn == nullptr || ggn->kind != GgnKind::kFull) {
        throw Error(ErrorCode::kMissingCurvature, "wass-exact needs the full GGN");
      }
      scores.score_per_weight = exact_marginal_variances(*ggn);
      break;
    case SelectionStrategy::kWassersteinDiag:
      if (ggn == nullptr || ggn->kind != GgnKind::kDiagonal) {
        throw Error(ErrorCode::kMissingCurvature, "wass-diag needs the diagonal GGN");
      }
      scores.score_per_weight = diag_marginal_variances(*ggn);
      break;
    case SelectionStrategy::kMagnitude:
      if (total > map.weights.size()) {
        throw Error(ErrorCode::kInvalidSize, "D exceeds parameter count");
      }
      scores.score_per_weight = map.weights.values().head(static_cast<Index>(total)).cwiseAbs();
      break;
    case SelectionStrategy::kRandom:
    case SelectionStrategy::kFinalLayer:
      break;
  }
  if (scores.has_scores() && static_cast<std::size_t>(scores.score_per_weight.size()) != total) {
    throw Error(ErrorCode::kDimensionMismatch, "curvature does not cover all D parameters");
  }
  return scores;
}

SubnetworkMask select_top_s(const Vector& scores, std::size_t s,
                            std::span<const std::size_t> excluded) {
  const std::size_t total = static_cast<std::size_t>(scores.size());
  if (!scores.allFinite()) throw Error(ErrorCode::kInvalidArgument, "scores must be finite");
  std::vector<std::size_t> pool = candidates(total, excluded);
  check_size(s, pool.size());
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Index>(a)];
    const double sb = scores[static_cast<Index>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s), pool.end(),
                    better);
  pool.resize(s);
  return SubnetworkMask(std::move(pool), total);
}

SubnetworkMask select_random(std::size_t total, std::size_t s, std::uint64_t seed,
                             std::span<const std::size_t> excluded) {
  std::vector<std::size_t> pool = candidates(total, excluded);
  check_size(s, pool.size());
  CounterRng rng(derive_seed(seed, "random-mask"));
  // partial Fisher-Yates: the first s slots are a uniform draw
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(s);
  return SubnetworkMask(std::move(pool), total);
}

SubnetworkMask select_final_layer(const MlpArchitecture& arch, bool include_biases) {
  ParameterLayout layout(arch);
  const std::size_t last = arch.num_layers() - 1;
  std::vector<std::size_t> idx = layout.layer_weight_indices(last);
  if (include_biases) {
    auto b = layout.layer_bias_indices(last);
    idx.insert(idx.end(), b.begin(), b.end());
  }
  return SubnetworkMask(std::move(idx), layout.eligible_count(include_biases));
}

SubnetworkMask select_subnetwork(const SelectionScores& scores, std::size_t s,
                                 const MlpArchitecture& arch, const SelectOptions& options) {
  const std::size_t total = ParameterLayout(arch).eligible_count(options.include_biases);
  switch (scores.strategy) {
    case SelectionStrategy::kRandom:
      return select_random(total, s, options.seed);
    case SelectionStrategy::kFinalLayer:
      return select_final_layer(arch, options.include_biases);
    default:
      break;
  }
  if (static_cast<std::size_t>(scores.score_per_weight.size()) != total) {
    throw Error(ErrorCode::kMissingCurvature, "scores do not cover all D parameters");
  }
  const std::size_t available = candidates(total, options.excluded).size();
  if (s <= available || s > total) {
    return select_top_s(scores.score_per_weight, s, options.excluded);
  }
  // more than the filter leaves: keep every survivor, then the best filtered ones
  std::vector<std::size_t> keep = candidates(total, options.excluded);
  const SubnetworkMask extra = select_top_s(scores.score_per_weight, s - available, keep);
  keep.insert(keep.end(), extra.selected().begin(), extra.selected().end());
  return SubnetworkMask(std::move(keep), total);
}

std::size_t size_from_fraction(double fraction, std::size_t total) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidSize, "fraction must be in (0, 1]");
  }
  const auto s = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  return std::clamp<std::size_t>(s, 1, total);
}

double residual_variance(const Vector& variances, const SubnetworkMask& mask) {
  if (static_cast<std::size_t>(variances.size()) != mask.total()) {
    throw Error(ErrorCode::kDimensionMismatch, "variances length must equal mask total");
  }
  std::vector<double> terms;
  terms.reserve(mask.total() - mask.size());
  for (std::size_t d = 0; d < mask.total(); ++d) {
    if (!mask.contains(d)) terms.push_back(variances[static_cast<Index>(d)]);
  }
  return linalg::pairwise_sum(terms);
}

double wasserstein_sq_exact(const Matrix& cov_full, const SubnetworkMask& mask) {
  if (cov_full.rows() != cov_full.cols() ||
      static_cast<std::size_t>(cov_full.rows()) != mask.total()) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance must be D x D");
  }
  const Vector m = mask.indicator();
  const Matrix masked = (m * m.transpose()).cwiseProduct(cov_full);
  const Matrix masked_root = linalg::matrix_sqrt_psd(masked);
  const Matrix inner = masked_root * cov_full * masked_root;
  const Matrix cross = linalg::matrix_sqrt_psd(0.5 * (inner + inner.transpose()));
  const double value = cov_full.trace() + masked.trace() - 2.0 * cross.trace();
  if (value < -1e-8 * std::max(1.0, cov_full.trace())) {
    throw Error(ErrorCode::kNotPsd, "negative Wasserstein distance " + std::to_string(value));
  }
  return std::max(0.0, value);
}

std::vector<std::size_t> dead_weight_filter(const Vector& ggn_diag_data_term, double threshold) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must be >= 0");
  std::vector<std::size_t> out;
  for (Index i = 0; i < ggn_diag_data_term.size(); ++i) {
    if (ggn_diag_data_term[i] <= threshold) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace sublaplace

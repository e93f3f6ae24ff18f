#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sublaplace/laplace.hpp"
#include "sublaplace/mask.hpp"
#include "sublaplace/net.hpp"
#include "sublaplace/train.hpp"

namespace sublaplace {

enum class SelectionStrategy {
  kWassersteinExact,
  kWassersteinDiag,
  kRandom,
  kFinalLayer,
  kMagnitude,
};

std::string_view to_string(SelectionStrategy s);
/// Accepts the CLI spellings: wass-exact, wass-diag, random, final-layer,
/// magnitude.
SelectionStrategy strategy_from_string(std::string_view name);

struct SelectionScores {
  SelectionStrategy strategy = SelectionStrategy::kWassersteinDiag;
  Vector score_per_weight;  // empty for random / final-layer

  bool has_scores() const { return score_per_weight.size() > 0; }
};

/// wass-exact: diag(H^{-1}) from the dense full GGN; wass-diag: 1/diag(H)
/// from the diagonal GGN; magnitude: |w_d|. Random and final-layer carry no
/// scores. `total` is D, the number of inference-eligible parameters.
SelectionScores score_weights(SelectionStrategy strategy, const MapEstimate& map,
                              const GgnMatrix* ggn, std::size_t total);

/// The s largest scores; ties go to the lower index. Indices in `excluded`
/// are never selected.
SubnetworkMask select_top_s(const Vector& scores, std::size_t s,
                            std::span<const std::size_t> excluded = {});

/// s indices drawn uniformly without replacement from [0, total), skipping
/// `excluded`.
SubnetworkMask select_random(std::size_t total, std::size_t s, std::uint64_t seed,
                             std::span<const std::size_t> excluded = {});

/// The output layer's weights (plus its biases when include_biases).
SubnetworkMask select_final_layer(const MlpArchitecture& arch, bool include_biases);

struct SelectOptions {
  std::uint64_t seed = 0;
  bool include_biases = false;
  std::vector<std::size_t> excluded;  // e.g. from dead_weight_filter
};

/// Dispatches on scores.strategy. For kFinalLayer `s` is ignored. The
/// exclusion list only applies to score-based strategies; when it leaves
/// fewer than `s` candidates, all survivors are kept and the rest is filled
/// from the excluded indices by score.
SubnetworkMask select_subnetwork(const SelectionScores& scores, std::size_t s,
                                 const MlpArchitecture& arch, const SelectOptions& options);

/// S = round(fraction * D), at least 1.
std::size_t size_from_fraction(double fraction, std::size_t total);

/// sum_d sigma_d^2 (1 - m_d): the squared 2-Wasserstein distance when the
/// weight posterior covariance is diagonal.
double residual_variance(const Vector& variances, const SubnetworkMask& mask);

/// Squared 2-Wasserstein distance between N(w, C) and N(w, M_S o C), where
/// M_S zeroes the rows and columns outside the mask:
/// Tr(C + C_S - 2 (C_S^{1/2} C C_S^{1/2})^{1/2}). Dense O(D^3); meant for
/// validation at small D.
double wasserstein_sq_exact(const Matrix& cov_full, const SubnetworkMask& mask);

/// Indices whose data-term GGN diagonal (prior excluded) is <= threshold,
/// i.e. parameters the training data never moves (dead ReLUs).
std::vector<std::size_t> dead_weight_filter(const Vector& ggn_diag_data_term, double threshold);

}  // namespace sublaplace

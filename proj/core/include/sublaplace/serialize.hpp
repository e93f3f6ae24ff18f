#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sublaplace/data.hpp"
#include "sublaplace/laplace.hpp"
#include "sublaplace/mask.hpp"
#include "sublaplace/train.hpp"

namespace sublaplace {

struct CheckpointMeta {
  TrainConfig train;
  std::optional<SplitSpec> split;
  Standardizer standardizer;
  std::string data_path;
  std::vector<std::string> target_columns;
};

struct Checkpoint {
  MapEstimate map;
  CheckpointMeta meta;
};

// All documents are JSON; doubles are written in shortest round-trip form,
// so save/load is lossless.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string mask_to_json(const SubnetworkMask& mask);
SubnetworkMask mask_from_json(std::string_view text);
void save_mask(const SubnetworkMask& mask, const std::filesystem::path& path);
SubnetworkMask load_mask(const std::filesystem::path& path);

struct PosteriorRecord {
  double lambda = 0.0;       // full-network prior precision
  double lambda_used = 0.0;  // the prior precision in the GGN
  bool rescaled = true;
};

/// Gaussian: {kind, mask, mean, covariance_lower, precision_factor_lower,
/// prior_precision, sigma2, ...}. Diagonal: {kind, mask, variances, ...}.
std::string posterior_to_json(const Posterior& posterior, const PosteriorRecord& record);
/// MAP weights outside the mask come from `map`.
std::unique_ptr<Posterior> posterior_from_json(std::string_view text, const MapEstimate& map,
                                               PosteriorRecord* record = nullptr);
void save_posterior(const Posterior& posterior, const PosteriorRecord& record,
                    const std::filesystem::path& path);
std::unique_ptr<Posterior> load_posterior(const std::filesystem::path& path,
                                          const MapEstimate& map,
                                          PosteriorRecord* record = nullptr);

}  // namespace sublaplace

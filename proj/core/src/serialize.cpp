#include "sublaplace/serialize.hpp"

#include <json.hpp>

#include "sublaplace/io.hpp"

namespace sublaplace {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json to_json_vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(raw.data(), static_cast<Index>(raw.size()));
}

json lower_to_json(const Matrix& m) {
  std::vector<double> out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k <= i; ++k) out.push_back(m(i, k));
  }
  return out;
}

Matrix lower_from(const json& j, Index n, bool symmetric) {
  const auto raw = j.get<std::vector<double>>();
  if (raw.size() != static_cast<std::size_t>(n * (n + 1) / 2)) {
    throw Error(ErrorCode::kParseError, "lower triangle has wrong length");
  }
  Matrix m = Matrix::Zero(n, n);
  std::size_t p = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k <= i; ++k) {
      m(i, k) = raw[p++];
      if (symmetric) m(k, i) = m(i, k);
    }
  }
  return m;
}

json mask_json(const SubnetworkMask& mask) {
  return {{"total", mask.total()}, {"selected", mask.selected()}};
}

SubnetworkMask mask_from(const json& j) {
  return SubnetworkMask(j.at("selected").get<std::vector<std::size_t>>(),
                        j.at("total").get<std::size_t>());
}

json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string(what) + ": " + e.what());
  }
}

template <typename F>
auto guarded(std::string_view what, F&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& map = ckpt.map;
  const auto& arch = map.architecture();
  const auto& t = ckpt.meta.train;
  json j;
  j["format"] = "sublaplace-checkpoint";
  j["version"] = kFormatVersion;
  j["architecture"] = {{"input_dim", arch.input_dim},
                       {"hidden_widths", arch.hidden_widths},
                       {"output_dim", arch.output_dim},
                       {"activation", "relu"}};
  j["task"] = std::string(to_string(map.task));
  j["weights"] = to_json_vec(map.weights.values());
  j["noise_log_variance"] = map.noise_log_variance;
  j["seed"] = map.seed;
  json meta;
  meta["best_epoch"] = map.best_epoch;
  meta["learning_rate"] = t.learning_rate;
  meta["momentum"] = t.momentum;
  meta["weight_decay"] = t.weight_decay;
  meta["batch_size"] = t.batch_size;
  meta["max_epochs"] = t.max_epochs;
  meta["patience"] = t.patience;
  meta["initial_noise_log_variance"] = t.initial_noise_log_variance;
  meta["data_path"] = ckpt.meta.data_path;
  meta["target_columns"] = ckpt.meta.target_columns;
  if (ckpt.meta.split) {
    const auto& s = *ckpt.meta.split;
    meta["split"] = {{"kind", s.kind == SplitKind::kGap ? "gap" : "standard"},
                     {"train_frac", s.train_frac},
                     {"val_frac_of_train", s.val_frac_of_train},
                     {"gap_dimension", s.gap_dimension},
                     {"seed", s.seed}};
  }
  const auto& st = ckpt.meta.standardizer;
  if (!st.empty()) {
    meta["normalization"] = {{"input_mean", to_json_vec(st.input_mean)},
                             {"input_std", to_json_vec(st.input_std)},
                             {"target_mean", to_json_vec(st.target_mean)},
                             {"target_std", to_json_vec(st.target_std)}};
  }
  j["training_meta"] = std::move(meta);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  const json j = parse(text, "checkpoint");
  return guarded("checkpoint", [&] {
    if (j.at("format") != "sublaplace-checkpoint") {
      throw Error(ErrorCode::kParseError, "not a checkpoint document");
    }
    MlpArchitecture arch;
    const auto& a = j.at("architecture");
    arch.input_dim = a.at("input_dim").get<std::size_t>();
    arch.hidden_widths = a.at("hidden_widths").get<std::vector<std::size_t>>();
    arch.output_dim = a.at("output_dim").get<std::size_t>();
    arch.validate();
    Checkpoint c{MapEstimate{WeightVector(arch, vec_from(j.at("weights"))), Task::kRegression, 0.0, {}, {}, 0, 0}, {}};
    c.map.task = task_from_string(j.at("task").get<std::string>());
    c.map.noise_log_variance = j.at("noise_log_variance").get<double>();
    c.map.seed = j.at("seed").get<std::uint64_t>();
    const auto& m = j.at("training_meta");
    c.map.best_epoch = m.value("best_epoch", std::size_t{0});
    auto& t = c.meta.train;
    t.task = c.map.task;
    t.seed = c.map.seed;
    t.learning_rate = m.value("learning_rate", t.learning_rate);
    t.momentum = m.value("momentum", t.momentum);
    t.weight_decay = m.value("weight_decay", t.weight_decay);
    t.batch_size = m.value("batch_size", t.batch_size);
    t.max_epochs = m.value("max_epochs", t.max_epochs);
    t.patience = m.value("patience", t.patience);
    t.initial_noise_log_variance = m.value("initial_noise_log_variance", 0.0);
    c.meta.data_path = m.value("data_path", std::string());
    c.meta.target_columns = m.value("target_columns", std::vector<std::string>{});
    if (m.contains("split")) {
      const auto& s = m.at("split");
      SplitSpec spec;
      spec.kind = s.at("kind") == "gap" ? SplitKind::kGap : SplitKind::kStandard;
      spec.train_frac = s.at("train_frac").get<double>();
      spec.val_frac_of_train = s.at("val_frac_of_train").get<double>();
      spec.gap_dimension = s.at("gap_dimension").get<std::size_t>();
      spec.seed = s.at("seed").get<std::uint64_t>();
      c.meta.split = spec;
    }
    if (m.contains("normalization")) {
      const auto& n = m.at("normalization");
      auto& st = c.meta.standardizer;
      st.input_mean = vec_from(n.at("input_mean"));
      st.input_std = vec_from(n.at("input_std"));
      st.target_mean = vec_from(n.at("target_mean"));
      st.target_std = vec_from(n.at("target_std"));
    }
    return c;
  });
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_text_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(io::read_text(path));
}

std::string mask_to_json(const SubnetworkMask& mask) {
  json j = mask_json(mask);
  j["format"] = "sublaplace-mask";
  j["version"] = kFormatVersion;
  return j.dump() + "\n";
}

SubnetworkMask mask_from_json(std::string_view text) {
  const json j = parse(text, "mask");
  return guarded("mask", [&] { return mask_from(j); });
}

void save_mask(const SubnetworkMask& mask, const std::filesystem::path& path) {
  io::write_text_atomic(path, mask_to_json(mask));
}

SubnetworkMask load_mask(const std::filesystem::path& path) {
  return mask_from_json(io::read_text(path));
}

std::string posterior_to_json(const Posterior& posterior, const PosteriorRecord& record) {
  json j;
  j["format"] = "sublaplace-posterior";
  j["version"] = kFormatVersion;
  j["mask"] = mask_json(posterior.mask());
  j["lambda"] = record.lambda;
  j["lambda_used"] = record.lambda_used;
  j["rescaled"] = record.rescaled;
  if (const auto* g = dynamic_cast<const GaussianPosterior*>(&posterior)) {
    j["kind"] = "gaussian";
    j["mean"] = to_json_vec(g->mean());
    j["covariance_lower"] = lower_to_json(g->covariance());
    j["precision_factor_lower"] = lower_to_json(g->precision_factor().lower());
    j["jitter"] = g->precision_factor().jitter_applied();
    j["prior_precision"] = g->prior_precision();
    j["sigma2"] = g->noise_variance();
  } else if (const auto* d = dynamic_cast<const DiagonalPosterior*>(&posterior)) {
    j["kind"] = "diagonal";
    j["variances"] = to_json_vec(d->variances());
    j["prior_precision"] = record.lambda_used;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown posterior type");
  }
  return j.dump() + "\n";
}

std::unique_ptr<Posterior> posterior_from_json(std::string_view text, const MapEstimate& map,
                                               PosteriorRecord* record) {
  const json j = parse(text, "posterior");
  return guarded("posterior", [&]() -> std::unique_ptr<Posterior> {
    SubnetworkMask mask = mask_from(j.at("mask"));
    if (record != nullptr) {
      record->lambda = j.at("lambda").get<double>();
      record->lambda_used = j.at("lambda_used").get<double>();
      record->rescaled = j.at("rescaled").get<bool>();
    }
    if (mask.total() > map.weights.size()) {
      throw Error(ErrorCode::kIndexMapMismatch, "posterior mask exceeds checkpoint parameters");
    }
    if (j.at("kind") == "diagonal") {
      return std::make_unique<DiagonalPosterior>(std::move(mask), vec_from(j.at("variances")));
    }
    const Index s = static_cast<Index>(mask.size());
    Vector mean = vec_from(j.at("mean"));
    for (Index k = 0; k < s; ++k) {
      if (mean[k] != map.weights.values()[static_cast<Index>(mask.selected()[static_cast<std::size_t>(k)])]) {
        throw Error(ErrorCode::kIndexMapMismatch, "posterior mean does not match checkpoint weights");
      }
    }
    linalg::CholeskyFactor factor(lower_from(j.at("precision_factor_lower"), s, false),
                                  j.at("jitter").get<double>());
    return std::make_unique<GaussianPosterior>(std::move(mask), std::move(mean), std::move(factor),
                                               j.at("prior_precision").get<double>(),
                                               j.at("sigma2").get<double>(), map.weights.values());
  });
}

void save_posterior(const Posterior& posterior, const PosteriorRecord& record,
                    const std::filesystem::path& path) {
  io::write_text_atomic(path, posterior_to_json(posterior, record));
}

std::unique_ptr<Posterior> load_posterior(const std::filesystem::path& path,
                                          const MapEstimate& map, PosteriorRecord* record) {
  return posterior_from_json(io::read_text(path), map, record);
}

}  // namespace sublaplace

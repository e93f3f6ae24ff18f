#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "support.hpp"

namespace sublaplace::cli {

struct ArchOptions {
  std::vector<std::size_t> widths;  // --arch; overrides hidden/layers
  std::size_t hidden = 50;
  std::size_t layers = 1;
};

struct SplitOptions {
  std::string kind = "standard";  // standard | gap | none
  std::size_t gap_dim = 0;
  double train_frac = 0.9;
  double val_frac = 0.15;
  std::optional<std::uint64_t> split_seed;
};

struct TrainOptions {
  std::filesystem::path data;
  std::vector<std::string> targets;
  std::string task = "regression";
  ArchOptions arch;
  SplitOptions split;
  TrainConfig train;
  bool no_standardize = false;
  std::uint64_t seed = 0;
  std::filesystem::path out = "checkpoint.json";
};

struct CurvatureOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data;
  std::string strategy = "wass-diag";
  double lambda = 1.0;
  bool include_biases = false;
};

struct ScoreOptions {
  CurvatureOptions curv;
  std::filesystem::path out = "scores.csv";
};

struct SelectOptionsCli {
  CurvatureOptions curv;
  std::optional<double> fraction;
  std::optional<std::size_t> size;
  bool dead_filter = false;
  double dead_threshold = 0.0;
  std::uint64_t seed = 0;
  std::size_t histogram_bins = 20;
  std::filesystem::path out = "mask.json";
};

struct InferOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> data;
  double lambda = 1.0;
  bool no_rescale = false;
  bool diagonal = false;
  std::filesystem::path out = "posterior.json";
};

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> posterior;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = "predictions.csv";
};

struct EvaluateOptions {
  // artifact mode
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> posterior;
  // comparison mode
  std::optional<std::filesystem::path> data;
  std::vector<std::string> targets;
  std::string methods = "map,full,diag,final-layer,wass-diag:0.25,random:0.25";
  std::string grid = "default";
  std::size_t splits = 20;
  bool no_gap = false;
  std::size_t max_gap_splits = 0;
  bool include_biases = false;
  ArchOptions arch;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::filesystem::path out = "evaluation";
};

struct ReproduceOptions {
  std::string experiment;
  std::uint64_t seed = 0;
  bool quick = false;
  bool dead_filter = false;
  std::optional<std::filesystem::path> data;
  std::optional<std::size_t> splits;
  std::size_t workers = 0;
  std::filesystem::path out = "report";
};

struct GenerateOptions {
  std::string dataset = "toy1d";
  std::optional<std::size_t> n;
  std::optional<double> noise;
  std::uint64_t seed = 0;
  std::filesystem::path out = "data.csv";
};

void cmd_train(const TrainOptions& o, Manifest& m);
void cmd_score(const ScoreOptions& o, Manifest& m);
void cmd_select(const SelectOptionsCli& o, Manifest& m);
void cmd_infer(const InferOptions& o, Manifest& m);
void cmd_predict(const PredictOptions& o, Manifest& m);
void cmd_evaluate(const EvaluateOptions& o, Manifest& m);
void cmd_reproduce(const ReproduceOptions& o, Manifest& m);
void cmd_generate(const GenerateOptions& o, Manifest& m);

}  // namespace sublaplace::cli

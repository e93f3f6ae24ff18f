#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sublaplace/eval.hpp"
#include "sublaplace/serialize.hpp"

namespace sublaplace::cli {

inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingFile = 2;
inline constexpr int kExitUsage = 64;

/// Thrown for bad flag combinations that CLI11 cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an input file does not exist.
class MissingFile : public std::runtime_error {
 public:
  explicit MissingFile(const std::filesystem::path& path)
      : std::runtime_error("file not found: " + path.string()) {}
};

void require_file(const std::filesystem::path& path);

/// Resolved configuration plus output list, written as JSON next to the
/// command's primary output.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv);

  nlohmann::json& config() { return doc_["config"]; }
  nlohmann::json& results() { return doc_["results"]; }
  void add_output(const std::filesystem::path& path);
  void write(const std::filesystem::path& path);

 private:
  nlohmann::json doc_;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& output);

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const MlpArchitecture& arch);
nlohmann::json to_json(const SplitSpec& spec);

/// Training-time data rebuilt from a checkpoint: the stored CSV (or an
/// override), re-split with the stored split settings and standardized with the stored
/// statistics.
struct DataContext {
  Dataset train;
  Dataset val;
  Dataset test;
  bool has_split = false;
};

CsvSchema schema_for(const Checkpoint& ckpt);
DataContext load_context(const Checkpoint& ckpt, const std::optional<std::filesystem::path>& data);

MlpArchitecture make_architecture(std::size_t input_dim, std::size_t output_dim,
                                  const std::vector<std::size_t>& widths, std::size_t hidden,
                                  std::size_t layers);

std::vector<double> parse_grid(const std::string& text);
MethodConfig parse_method(const std::string& token, std::uint64_t seed);
std::vector<std::string> split_list(const std::string& text);

}  // namespace sublaplace::cli

#include "support.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "sublaplace/experiments.hpp"
#include "sublaplace/io.hpp"

namespace sublaplace::cli {

using nlohmann::json;

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingFile(path);
}

Manifest::Manifest(std::string command, const std::vector<std::string>& argv) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  doc_ = {{"format", "sublaplace-manifest"},
          {"version", 1},
          {"command", std::move(command)},
          {"argv", argv},
          {"created_at", stamp},
          {"config", json::object()},
          {"outputs", json::array()}};
}

void Manifest::add_output(const std::filesystem::path& path) {
  doc_["outputs"].push_back(path.string());
}

void Manifest::write(const std::filesystem::path& path) {
  io::write_text_atomic(path, doc_.dump(2) + "\n");
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  std::filesystem::path p = output;
  p += ".manifest.json";
  return p;
}

json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"momentum", cfg.momentum},
          {"weight_decay", cfg.weight_decay},   {"batch_size", cfg.batch_size},
          {"max_epochs", cfg.max_epochs},       {"patience", cfg.patience},
          {"seed", cfg.seed},                   {"task", std::string(to_string(cfg.task))}};
}

json to_json(const MlpArchitecture& arch) {
  return {{"input_dim", arch.input_dim},
          {"hidden_widths", arch.hidden_widths},
          {"output_dim", arch.output_dim},
          {"weights", arch.weight_count()},
          {"parameters", arch.parameter_count()}};
}

json to_json(const SplitSpec& spec) {
  return {{"kind", spec.kind == SplitKind::kGap ? "gap" : "standard"},
          {"train_frac", spec.train_frac},
          {"val_frac_of_train", spec.val_frac_of_train},
          {"gap_dimension", spec.gap_dimension},
          {"seed", spec.seed}};
}

CsvSchema schema_for(const Checkpoint& ckpt) {
  return CsvSchema{ckpt.meta.target_columns, ckpt.map.task};
}

DataContext load_context(const Checkpoint& ckpt,
                         const std::optional<std::filesystem::path>& data) {
  const std::filesystem::path path = data ? *data : std::filesystem::path(ckpt.meta.data_path);
  if (path.empty()) {
    throw UsageError("checkpoint records no data path; pass --data");
  }
  require_file(path);
  const Dataset raw = load_csv(path, schema_for(ckpt));
  const Standardizer& st = ckpt.meta.standardizer;
  auto prep = [&](const Dataset& d) { return st.empty() ? d : standardize(d, st); };
  DataContext ctx;
  if (ckpt.meta.split) {
    const Split split = make_split(raw, *ckpt.meta.split);
    ctx.train = prep(split.train);
    ctx.val = prep(split.val);
    ctx.test = prep(split.test);
    ctx.has_split = true;
  } else {
    ctx.train = prep(raw);
    ctx.val = ctx.train.subset({});
    ctx.test = ctx.train.subset({});
  }
  return ctx;
}

MlpArchitecture make_architecture(std::size_t input_dim, std::size_t output_dim,
                                  const std::vector<std::size_t>& widths, std::size_t hidden,
                                  std::size_t layers) {
  MlpArchitecture arch;
  arch.input_dim = input_dim;
  arch.output_dim = output_dim;
  arch.hidden_widths = widths.empty() ? std::vector<std::size_t>(layers, hidden) : widths;
  arch.validate();
  return arch;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  if (text == "default") return default_lambda_grid();
  std::vector<double> grid;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0.0)) {
      throw UsageError("bad --grid entry '" + item + "' (positive numbers or 'default')");
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw UsageError("--grid is empty");
  return grid;
}

// map | full | diag | final-layer | <strategy>:<fraction>
MethodConfig parse_method(const std::string& token, std::uint64_t seed) {
  if (token == "map") return map_method();
  if (token == "full") return full_method();
  if (token == "diag") return diagonal_method();
  if (token == "final-layer") return final_layer_method();
  const auto colon = token.find(':');
  if (colon == std::string::npos) {
    throw UsageError("unknown method '" + token +
                     "' (map, full, diag, final-layer or <strategy>:<fraction>)");
  }
  SelectionStrategy strategy;
  try {
    strategy = strategy_from_string(token.substr(0, colon));
  } catch (const Error&) {
    throw UsageError("unknown strategy in method '" + token + "'");
  }
  double fraction = 0.0;
  try {
    fraction = std::stod(token.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("bad fraction in method '" + token + "'");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError("fraction in method '" + token + "' must be in (0, 1]");
  }
  return subnetwork_method(strategy, fraction, seed);
}

}  // namespace sublaplace::cli

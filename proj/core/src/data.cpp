#include "sublaplace/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sublaplace/io.hpp"
#include "sublaplace/rng.hpp"

namespace sublaplace {
namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::size_t val_count(std::size_t remaining, double frac) {
  // ceil with a guard against 0.15 * n landing a hair above an integer
  return static_cast<std::size_t>(std::ceil(frac * static_cast<double>(remaining) - 1e-9));
}

std::vector<std::string> default_names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

}  // namespace

std::size_t Dataset::output_dim() const {
  return task == Task::kRegression ? static_cast<std::size_t>(targets.cols()) : num_classes;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.task = task;
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  out.target_names = target_names;
  out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  if (task == Task::kRegression) {
    out.targets.resize(static_cast<Index>(rows.size()), targets.cols());
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index src = static_cast<Index>(rows[r]);
    if (src >= inputs.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "subset row out of range");
    }
    out.inputs.row(static_cast<Index>(r)) = inputs.row(src);
    if (task == Task::kRegression) {
      out.targets.row(static_cast<Index>(r)) = targets.row(src);
    } else {
      out.labels.push_back(labels[rows[r]]);
    }
  }
  return out;
}

void Dataset::validate() const {
  if (!inputs.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "dataset inputs contain NaN/Inf");
  }
  if (task == Task::kRegression) {
    if (targets.rows() != inputs.rows() || targets.cols() == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "targets must be N x O with O >= 1");
    }
    if (!targets.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "dataset targets contain NaN/Inf");
    }
  } else {
    if (labels.size() != size()) {
      throw Error(ErrorCode::kDimensionMismatch, "one label per input required");
    }
    for (int label : labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
        throw Error(ErrorCode::kInvalidArgument, "label out of range");
      }
    }
  }
}

void SplitSpec::validate(std::size_t input_dim) const {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train_frac must be in (0, 1)");
  }
  if (!(val_frac_of_train > 0.0 && val_frac_of_train < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "val_frac_of_train must be in (0, 1)");
  }
  if (kind == SplitKind::kGap && gap_dimension >= input_dim) {
    throw Error(ErrorCode::kInvalidArgument, "gap_dimension out of range");
  }
}

Split split_standard(const Dataset& data, const SplitSpec& spec) {
  spec.validate(data.input_dim());
  const std::size_t n = data.size();
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * (1.0 - spec.train_frac)));
  const std::size_t remaining = n - std::min(n, n_test);
  const std::size_t n_val = val_count(remaining, spec.val_frac_of_train);
  if (n_test == 0 || n_val == 0 || n_val >= remaining) {
    throw Error(ErrorCode::kTooFewPoints,
                "cannot split " + std::to_string(n) + " points into train/val/test");
  }
  const auto order = shuffled_indices(n, derive_seed(spec.seed, "split"));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                               order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val),
                                 order.end());
  return {data.subset(train), data.subset(val), data.subset(test)};
}

Split split_gap(const Dataset& data, std::size_t dim, const SplitSpec& spec) {
  SplitSpec s = spec;
  s.kind = SplitKind::kGap;
  s.gap_dimension = dim;
  s.validate(data.input_dim());
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Index col = static_cast<Index>(dim);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.inputs(static_cast<Index>(a), col) < data.inputs(static_cast<Index>(b), col);
  });
  const auto lo = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 3.0));
  const auto hi = static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(n) / 3.0));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                order.begin() + static_cast<std::ptrdiff_t>(hi));
  std::vector<std::size_t> rest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
  rest.insert(rest.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());
  const std::size_t n_val = val_count(rest.size(), s.val_frac_of_train);
  if (test.empty() || n_val == 0 || n_val >= rest.size()) {
    throw Error(ErrorCode::kTooFewPoints,
                "cannot gap-split " + std::to_string(n) + " points");
  }
  const auto perm = shuffled_indices(rest.size(), derive_seed(s.seed, "gap-val"));
  std::vector<std::size_t> val;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    (i < n_val ? val : train).push_back(rest[perm[i]]);
  }
  return {data.subset(train), data.subset(val), data.subset(test)};
}

Split make_split(const Dataset& data, const SplitSpec& spec) {
  return spec.kind == SplitKind::kGap ? split_gap(data, spec.gap_dimension, spec)
                                      : split_standard(data, spec);
}

Standardizer fit_standardizer(const Dataset& train) {
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot standardize empty data");
  auto stats = [](const Matrix& m, Vector& mean, Vector& sd) {
    mean = m.colwise().mean().transpose();
    sd.resize(m.cols());
    for (Index c = 0; c < m.cols(); ++c) {
      const double var = (m.col(c).array() - mean[c]).square().mean();
      sd[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  };
  Standardizer s;
  stats(train.inputs, s.input_mean, s.input_std);
  if (train.task == Task::kRegression) stats(train.targets, s.target_mean, s.target_std);
  return s;
}

Dataset standardize(const Dataset& data, const Standardizer& s) {
  Dataset out = data;
  out.inputs = ((data.inputs.rowwise() - s.input_mean.transpose()).array().rowwise() /
                s.input_std.transpose().array())
                   .matrix();
  if (data.task == Task::kRegression && s.target_mean.size() > 0) {
    out.targets = ((data.targets.rowwise() - s.target_mean.transpose()).array().rowwise() /
                   s.target_std.transpose().array())
                      .matrix();
  }
  return out;
}

Dataset destandardize(const Dataset& data, const Standardizer& s) {
  Dataset out = data;
  out.inputs = (data.inputs.array().rowwise() * s.input_std.transpose().array()).matrix();
  out.inputs.rowwise() += s.input_mean.transpose();
  if (data.task == Task::kRegression && s.target_mean.size() > 0) {
    out.targets = (data.targets.array().rowwise() * s.target_std.transpose().array()).matrix();
    out.targets.rowwise() += s.target_mean.transpose();
  }
  return out;
}

Split standardize(const Split& split, const Standardizer& s) {
  return {standardize(split.train, s), standardize(split.val, s), standardize(split.test, s)};
}

double toy_function(double x) { return std::sin(2.0 * x) + 0.3 * x; }

Dataset make_toy_1d(std::size_t n_per_cluster, double noise_std, std::uint64_t seed) {
  if (n_per_cluster == 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_per_cluster must be >= 1");
  }
  const auto& g = kToyGeometry;
  CounterRng rng(derive_seed(seed, "toy1d"));
  Dataset d;
  d.task = Task::kRegression;
  d.inputs.resize(static_cast<Index>(2 * n_per_cluster), 1);
  d.targets.resize(static_cast<Index>(2 * n_per_cluster), 1);
  for (std::size_t i = 0; i < 2 * n_per_cluster; ++i) {
    const bool left = i < n_per_cluster;
    const double x = left ? rng.uniform(g.left_lo, g.left_hi) : rng.uniform(g.right_lo, g.right_hi);
    const double noise = noise_std > 0.0 ? noise_std * rng.normal() : 0.0;
    d.inputs(static_cast<Index>(i), 0) = x;
    d.targets(static_cast<Index>(i), 0) = toy_function(x) + noise;
  }
  d.feature_names = {"x"};
  d.target_names = {"y"};
  return d;
}

Matrix toy_in_between_grid(std::size_t n) {
  const auto& g = kToyGeometry;
  Matrix grid(static_cast<Index>(n), 1);
  const double width = g.right_lo - g.left_hi;
  for (std::size_t i = 0; i < n; ++i) {
    grid(static_cast<Index>(i), 0) =
        g.left_hi + width * (static_cast<double>(i) + 1.0) / (static_cast<double>(n) + 1.0);
  }
  return grid;
}

Dataset make_two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "two moons needs n >= 2");
  CounterRng rng(derive_seed(seed, "two-moons"));
  Dataset d;
  d.task = Task::kClassification;
  d.num_classes = 2;
  d.inputs.resize(static_cast<Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = std::numbers::pi * rng.uniform();
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += noise_std * rng.normal();
    y += noise_std * rng.normal();
    d.inputs(static_cast<Index>(i), 0) = x;
    d.inputs(static_cast<Index>(i), 1) = y;
    d.labels.push_back(label);
  }
  d.feature_names = {"x0", "x1"};
  d.target_names = {"label"};
  return d;
}

Dataset make_synthetic_tabular(std::size_t n, std::size_t input_dim, std::uint64_t seed) {
  if (n == 0 || input_dim < 4) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic tabular needs n >= 1 and >= 4 inputs");
  }
  const Index dim = static_cast<Index>(input_dim);
  CounterRng param_rng(derive_seed(seed, "tabular-params"));
  // correlated features through a unit lower-triangular mixing matrix
  Matrix mixing = Matrix::Identity(dim, dim);
  for (Index r = 1; r < dim; ++r) {
    for (Index c = 0; c < r; ++c) mixing(r, c) = 0.4 * param_rng.normal();
  }
  Matrix proj(3, dim);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < dim; ++c) proj(r, c) = param_rng.normal() / std::sqrt(double(dim));
  }
  const Vector amp = Vector::Constant(3, 1.0) + 0.5 * Vector::NullaryExpr(3, [&] {
                       return param_rng.uniform();
                     });

  CounterRng rng(derive_seed(seed, "tabular-rows"));
  Dataset d;
  d.task = Task::kRegression;
  d.inputs.resize(static_cast<Index>(n), dim);
  d.targets.resize(static_cast<Index>(n), 1);
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    Vector z(dim);
    for (Index c = 0; c < dim; ++c) z[c] = rng.normal();
    Vector x = mixing * z;
    double y = 0.0;
    for (Index r = 0; r < 3; ++r) y += amp[r] * std::tanh(1.5 * proj.row(r).dot(x));
    y += 0.35 * x[0] * x[1] - 0.25 * x[2] * x[2] + 0.3 * std::sin(2.0 * x[3]);
    const double noise_sd = 0.35 * (1.0 + 0.3 * std::tanh(x[1]));
    y += noise_sd * rng.normal();
    // right-skewed measurements, as in many physico-chemical features
    for (Index c = 4; c < dim; c += 3) x[c] = std::exp(0.5 * x[c]);
    d.inputs.row(i) = x.transpose();
    d.targets(i, 0) = y;
  }
  d.feature_names = default_names("x", input_dim);
  d.target_names = {"y"};
  return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::kParseError, "row " + std::to_string(row) + ", column '" +
                                            column + "': cannot parse '" + cell + "'");
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const std::string text = io::read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "' is empty");
  }
  const auto header = split_csv_line(line);
  std::vector<std::size_t> target_cols;
  if (schema.target_columns.empty()) {
    target_cols.push_back(header.size() - 1);
  } else {
    for (const auto& name : schema.target_columns) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw Error(ErrorCode::kMissingColumn,
                    "column '" + name + "' not found in '" + path.string() + "'");
      }
      target_cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  if (schema.task == Task::kClassification && target_cols.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "classification needs exactly one label column");
  }
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(target_cols.begin(), target_cols.end(), c) == target_cols.end()) {
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) {
    throw Error(ErrorCode::kMissingColumn, "no feature columns in '" + path.string() + "'");
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "row " + std::to_string(row_number) + ": expected " +
                                              std::to_string(header.size()) + " cells, got " +
                                              std::to_string(cells.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      values[c] = parse_cell(cells[c], row_number, header[c]);
    }
    rows.push_back(std::move(values));
  }

  Dataset d;
  d.task = schema.task;
  const Index n = static_cast<Index>(rows.size());
  d.inputs.resize(n, static_cast<Index>(feature_cols.size()));
  for (std::size_t c : feature_cols) d.feature_names.push_back(header[c]);
  for (std::size_t c : target_cols) d.target_names.push_back(header[c]);
  if (d.task == Task::kRegression) d.targets.resize(n, static_cast<Index>(target_cols.size()));
  int max_label = -1;
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      d.inputs(i, static_cast<Index>(k)) = r[feature_cols[k]];
    }
    if (d.task == Task::kRegression) {
      for (std::size_t k = 0; k < target_cols.size(); ++k) {
        d.targets(i, static_cast<Index>(k)) = r[target_cols[k]];
      }
    } else {
      const double v = r[target_cols[0]];
      if (v < 0 || v != std::floor(v)) {
        throw Error(ErrorCode::kParseError, "row " + std::to_string(i + 2) +
                                                ": class label must be a non-negative integer");
      }
      d.labels.push_back(static_cast<int>(v));
      max_label = std::max(max_label, static_cast<int>(v));
    }
  }
  if (d.task == Task::kClassification) d.num_classes = static_cast<std::size_t>(max_label + 1);
  d.validate();
  return d;
}

std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  const auto features = data.feature_names.size() == data.input_dim()
                            ? data.feature_names
                            : default_names("x", data.input_dim());
  std::vector<std::string> targets = data.target_names;
  const std::size_t n_targets =
      data.task == Task::kRegression ? static_cast<std::size_t>(data.targets.cols()) : 1;
  if (targets.size() != n_targets) {
    targets = data.task == Task::kRegression ? default_names("y", n_targets)
                                             : std::vector<std::string>{"label"};
  }
  bool first = true;
  for (const auto& name : features) {
    out << (first ? "" : ",") << name;
    first = false;
  }
  for (const auto& name : targets) out << "," << name;
  out << "\n";
  for (Index i = 0; i < data.inputs.rows(); ++i) {
    for (Index c = 0; c < data.inputs.cols(); ++c) {
      out << (c == 0 ? "" : ",") << io::format_double(data.inputs(i, c));
    }
    if (data.task == Task::kRegression) {
      for (Index c = 0; c < data.targets.cols(); ++c) {
        out << "," << io::format_double(data.targets(i, c));
      }
    } else {
      out << "," << data.labels[static_cast<std::size_t>(i)];
    }
    out << "\n";
  }
  return out.str();
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  io::write_text_atomic(path, to_csv(data));
}

}  // namespace sublaplace

#include "sublaplace/net.hpp"

#include <cmath>
#include <string>

#include "sublaplace/rng.hpp"

namespace sublaplace {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using WeightMap = Eigen::Map<RowMajorMatrix>;

ConstWeightMap layer_weights(const WeightVector& w, std::size_t layer) {
  const auto& arch = w.architecture();
  return ConstWeightMap(w.values().data() + w.layout().weight_offset(layer),
                        static_cast<Index>(arch.layer_output_dim(layer)),
                        static_cast<Index>(arch.layer_input_dim(layer)));
}

Eigen::Map<const Vector> layer_bias(const WeightVector& w, std::size_t layer) {
  return Eigen::Map<const Vector>(w.values().data() + w.layout().bias_offset(layer),
                                  static_cast<Index>(w.architecture().layer_output_dim(layer)));
}

}  // namespace

void MlpArchitecture::validate() const {
  if (input_dim == 0 || output_dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "architecture dims must be >= 1");
  }
  for (std::size_t width : hidden_widths) {
    if (width == 0) {
      throw Error(ErrorCode::kInvalidArgument, "hidden widths must be >= 1");
    }
  }
}

std::size_t MlpArchitecture::layer_input_dim(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_widths.at(layer - 1);
}

std::size_t MlpArchitecture::layer_output_dim(std::size_t layer) const {
  return layer == hidden_widths.size() ? output_dim : hidden_widths.at(layer);
}

std::size_t MlpArchitecture::weight_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    total += layer_input_dim(l) * layer_output_dim(l);
  }
  return total;
}

std::size_t MlpArchitecture::bias_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) total += layer_output_dim(l);
  return total;
}

std::size_t MlpArchitecture::equal_width_weight_count(std::size_t input_dim,
                                                      std::size_t width,
                                                      std::size_t hidden_layers) {
  if (hidden_layers == 0) {
    throw Error(ErrorCode::kInvalidArgument, "hidden_layers must be >= 1");
  }
  return (input_dim + 1) * width + (hidden_layers - 1) * width * width;
}

ParameterLayout::ParameterLayout(MlpArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  const std::size_t layers = arch_.num_layers();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    weight_offsets_.push_back(offset);
    offset += arch_.layer_input_dim(l) * arch_.layer_output_dim(l);
  }
  weight_total_ = offset;
  for (std::size_t l = 0; l < layers; ++l) {
    bias_offsets_.push_back(offset);
    offset += arch_.layer_output_dim(l);
  }
  total_ = offset;
}

std::size_t ParameterLayout::weight_index(std::size_t layer, std::size_t row,
                                          std::size_t col) const {
  if (row >= arch_.layer_output_dim(layer) || col >= arch_.layer_input_dim(layer)) {
    throw Error(ErrorCode::kDimensionMismatch, "weight coordinate out of range");
  }
  return weight_offsets_.at(layer) + row * arch_.layer_input_dim(layer) + col;
}

std::size_t ParameterLayout::bias_index(std::size_t layer, std::size_t row) const {
  if (row >= arch_.layer_output_dim(layer)) {
    throw Error(ErrorCode::kDimensionMismatch, "bias coordinate out of range");
  }
  return bias_offsets_.at(layer) + row;
}

ParamCoord ParameterLayout::coord(std::size_t flat) const {
  if (flat >= total_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "flat index " + std::to_string(flat) + " out of range");
  }
  const std::size_t layers = arch_.num_layers();
  if (flat < weight_total_) {
    std::size_t layer = layers - 1;
    while (weight_offsets_[layer] > flat) --layer;
    const std::size_t local = flat - weight_offsets_[layer];
    const std::size_t fan_in = arch_.layer_input_dim(layer);
    return {layer, ParamKind::kWeight, local / fan_in, local % fan_in};
  }
  std::size_t layer = layers - 1;
  while (bias_offsets_[layer] > flat) --layer;
  return {layer, ParamKind::kBias, flat - bias_offsets_[layer], 0};
}

std::vector<std::size_t> ParameterLayout::layer_weight_indices(std::size_t layer) const {
  const std::size_t n = arch_.layer_input_dim(layer) * arch_.layer_output_dim(layer);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = weight_offsets_.at(layer) + i;
  return out;
}

std::vector<std::size_t> ParameterLayout::layer_bias_indices(std::size_t layer) const {
  const std::size_t n = arch_.layer_output_dim(layer);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = bias_offsets_.at(layer) + i;
  return out;
}

WeightVector::WeightVector(const MlpArchitecture& arch, Vector values)
    : layout_(arch), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != layout_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "weight vector has " + std::to_string(values_.size()) +
                    " entries, architecture needs " + std::to_string(layout_.size()));
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "weight vector has non-finite entries");
  }
}

WeightVector WeightVector::zeros(const MlpArchitecture& arch) {
  return WeightVector(arch, Vector::Zero(static_cast<Index>(arch.parameter_count())));
}

WeightVector WeightVector::initialize(const MlpArchitecture& arch, std::uint64_t seed) {
  ParameterLayout layout(arch);
  Vector values(static_cast<Index>(layout.size()));
  CounterRng rng(derive_seed(seed, "init"));
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const double fan_in = static_cast<double>(arch.layer_input_dim(l));
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t idx : layout.layer_weight_indices(l)) {
      values[static_cast<Index>(idx)] = stddev * rng.normal();
    }
    const double bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t idx : layout.layer_bias_indices(l)) {
      values[static_cast<Index>(idx)] = rng.uniform(-bound, bound);
    }
  }
  return WeightVector(arch, std::move(values));
}

WeightVector WeightVector::with_values(Vector values) const {
  return WeightVector(architecture(), std::move(values));
}

Matrix forward_batch(const WeightVector& w, const Matrix& inputs, ForwardTrace* trace) {
  const auto& arch = w.architecture();
  if (static_cast<std::size_t>(inputs.cols()) != arch.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "inputs have " + std::to_string(inputs.cols()) +
                    " columns, network expects " + std::to_string(arch.input_dim));
  }
  const std::size_t layers = arch.num_layers();
  if (trace != nullptr) {
    trace->activations.clear();
    trace->preactivations.clear();
    trace->activations.push_back(inputs.transpose());
  }
  Matrix a = inputs.transpose();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = layer_weights(w, l) * a;
    z.colwise() += layer_bias(w, l);
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
      if (trace != nullptr) {
        trace->preactivations.push_back(std::move(z));
        trace->activations.push_back(a);
      }
    } else {
      a = std::move(z);
      if (trace != nullptr) trace->preactivations.push_back(a);
    }
  }
  return a.transpose();
}

Vector forward(const WeightVector& w, const Vector& x) {
  return forward_batch(w, x.transpose()).row(0).transpose();
}

Vector backward_batch(const WeightVector& w, const ForwardTrace& trace,
                      const Matrix& upstream) {
  const auto& arch = w.architecture();
  const auto& layout = w.layout();
  const std::size_t layers = arch.num_layers();
  if (trace.preactivations.size() != layers || trace.activations.size() != layers) {
    throw Error(ErrorCode::kDimensionMismatch, "forward trace does not match network");
  }
  const Index batch = trace.activations.front().cols();
  if (upstream.rows() != batch ||
      static_cast<std::size_t>(upstream.cols()) != arch.output_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "upstream must be N x O");
  }
  Vector grad = Vector::Zero(static_cast<Index>(layout.size()));
  Matrix delta = upstream.transpose();  // out x N
  for (std::size_t l = layers; l-- > 0;) {
    const Index out = static_cast<Index>(arch.layer_output_dim(l));
    const Index in = static_cast<Index>(arch.layer_input_dim(l));
    WeightMap gw(grad.data() + layout.weight_offset(l), out, in);
    gw.noalias() = delta * trace.activations[l].transpose();
    grad.segment(static_cast<Index>(layout.bias_offset(l)), out) = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = layer_weights(w, l).transpose() * delta;
      // ReLU'(0) := 0
      delta = back.cwiseProduct(
          (trace.preactivations[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grad;
}

Vector grad_params(const WeightVector& w, const Vector& x, const Vector& upstream) {
  if (static_cast<std::size_t>(upstream.size()) != w.architecture().output_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "upstream length must equal output_dim");
  }
  ForwardTrace trace;
  forward_batch(w, x.transpose(), &trace);
  return backward_batch(w, trace, upstream.transpose());
}

namespace {

void check_columns(std::span<const std::size_t> columns, std::size_t total) {
  for (std::size_t c : columns) {
    if (c >= total) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "column index " + std::to_string(c) + " out of range");
    }
  }
}

// Writes the O Jacobian rows of one input into out.block(row0, 0, O, K).
void jacobian_rows_into(const WeightVector& w, const Vector& x,
                        std::span<const std::size_t> columns, bool all_columns,
                        Matrix& out, Index row0) {
  const Index outputs = static_cast<Index>(w.architecture().output_dim);
  ForwardTrace trace;
  forward_batch(w, x.transpose(), &trace);
  Matrix upstream = Matrix::Zero(1, outputs);
  for (Index o = 0; o < outputs; ++o) {
    upstream.setZero();
    upstream(0, o) = 1.0;
    const Vector row = backward_batch(w, trace, upstream);
    if (all_columns) {
      out.row(row0 + o) = row.transpose();
    } else {
      for (std::size_t k = 0; k < columns.size(); ++k) {
        out(row0 + o, static_cast<Index>(k)) = row[static_cast<Index>(columns[k])];
      }
    }
  }
}

}  // namespace

Jacobian jacobian(const WeightVector& w, const Vector& x,
                  std::optional<std::span<const std::size_t>> columns) {
  const Index outputs = static_cast<Index>(w.architecture().output_dim);
  Jacobian jac;
  if (columns) {
    check_columns(*columns, w.size());
    jac.columns.assign(columns->begin(), columns->end());
  } else {
    jac.columns.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) jac.columns[i] = i;
  }
  jac.matrix.resize(outputs, static_cast<Index>(jac.columns.size()));
  jacobian_rows_into(w, x, jac.columns, !columns.has_value(), jac.matrix, 0);
  return jac;
}

Matrix stacked_jacobian(const WeightVector& w, const Matrix& inputs,
                        std::span<const std::size_t> columns) {
  check_columns(columns, w.size());
  const Index outputs = static_cast<Index>(w.architecture().output_dim);
  Matrix out(inputs.rows() * outputs, static_cast<Index>(columns.size()));
  for (Index n = 0; n < inputs.rows(); ++n) {
    jacobian_rows_into(w, inputs.row(n).transpose(), columns, false, out, n * outputs);
  }
  return out;
}

}  // namespace sublaplace

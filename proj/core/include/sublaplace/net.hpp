#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sublaplace/common.hpp"

namespace sublaplace {

enum class Activation { kRelu };

/// Fully connected ReLU network: input -> hidden_widths... -> output, with a
/// linear output layer.
struct MlpArchitecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths;
  std::size_t output_dim = 1;
  Activation activation = Activation::kRelu;

  void validate() const;

  std::size_t num_layers() const { return hidden_widths.size() + 1; }
  std::size_t layer_input_dim(std::size_t layer) const;
  std::size_t layer_output_dim(std::size_t layer) const;

  /// Sum of fan_in * fan_out over layers (biases excluded).
  std::size_t weight_count() const;
  std::size_t bias_count() const;
  std::size_t parameter_count() const { return weight_count() + bias_count(); }

  /// (i_d + 1) * w_d + (h_d - 1) * w_d^2: the closed-form weight count for a
  /// single-output network with h_d hidden layers of equal width w_d.
  static std::size_t equal_width_weight_count(std::size_t input_dim,
                                              std::size_t width,
                                              std::size_t hidden_layers);

  bool operator==(const MlpArchitecture&) const = default;
};

enum class ParamKind { kWeight, kBias };

struct ParamCoord {
  std::size_t layer = 0;
  ParamKind kind = ParamKind::kWeight;
  std::size_t row = 0;
  std::size_t col = 0;  // always 0 for biases

  bool operator==(const ParamCoord&) const = default;
};

// Flat ordering: every layer's weight matrix (row-major, out x in), layer by
// layer, followed by every layer's bias vector. Weights therefore occupy the
// prefix [0, weight_count()), which is what makes "weights only" inference a
// prefix of the flat vector.
class ParameterLayout {
 public:
  explicit ParameterLayout(MlpArchitecture arch);

  const MlpArchitecture& architecture() const { return arch_; }
  std::size_t size() const { return total_; }
  std::size_t weight_count() const { return weight_total_; }

  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }
  std::size_t weight_index(std::size_t layer, std::size_t row, std::size_t col) const;
  std::size_t bias_index(std::size_t layer, std::size_t row) const;
  ParamCoord coord(std::size_t flat_index) const;

  std::vector<std::size_t> layer_weight_indices(std::size_t layer) const;
  std::vector<std::size_t> layer_bias_indices(std::size_t layer) const;

  /// Number of parameters that inference may touch: weights only, or
  /// weights and biases. Always a prefix of the flat vector.
  std::size_t eligible_count(bool include_biases) const {
    return include_biases ? total_ : weight_total_;
  }

 private:
  MlpArchitecture arch_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::size_t weight_total_ = 0;
  std::size_t total_ = 0;
};

class WeightVector {
 public:
  WeightVector(const MlpArchitecture& arch, Vector values);

  static WeightVector zeros(const MlpArchitecture& arch);
  /// He-normal weights (variance 2 / fan_in); biases uniform in
  /// +-1/sqrt(fan_in).
  static WeightVector initialize(const MlpArchitecture& arch, std::uint64_t seed);

  const ParameterLayout& layout() const { return layout_; }
  const MlpArchitecture& architecture() const { return layout_.architecture(); }
  const Vector& values() const { return values_; }
  Vector& mutable_values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  WeightVector with_values(Vector values) const;

 private:
  ParameterLayout layout_;
  Vector values_;
};

/// O x K Jacobian of the outputs with respect to the listed flat parameters.
struct Jacobian {
  Matrix matrix;
  std::vector<std::size_t> columns;
};

/// Intermediate values of a batched forward pass, kept for backprop.
/// Column n of each matrix belongs to input n.
struct ForwardTrace {
  std::vector<Matrix> activations;     // [0] = inputs^T, [l] = relu(pre[l-1])
  std::vector<Matrix> preactivations;  // one per layer
};

Vector forward(const WeightVector& w, const Vector& x);

/// Batched forward pass: inputs N x I -> outputs N x O.
Matrix forward_batch(const WeightVector& w, const Matrix& inputs,
                     ForwardTrace* trace = nullptr);

/// Sum over the batch of d(upstream_n^T f(x_n)) / dw; upstream is N x O.
Vector backward_batch(const WeightVector& w, const ForwardTrace& trace,
                      const Matrix& upstream);

/// d(upstream^T f(x)) / dw for a single input.
Vector grad_params(const WeightVector& w, const Vector& x, const Vector& upstream);

/// One reverse sweep per output. With no column list the Jacobian covers
/// every flat parameter; otherwise the full rows are computed and the listed
/// columns are gathered, so restriction is exact.
Jacobian jacobian(const WeightVector& w, const Vector& x,
                  std::optional<std::span<const std::size_t>> columns = std::nullopt);

/// Jacobians for many inputs stacked row-wise: row n*O + o is d f_o(x_n)/dw
/// restricted to `columns`.
Matrix stacked_jacobian(const WeightVector& w, const Matrix& inputs,
                        std::span<const std::size_t> columns);

}  // namespace sublaplace

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ffl/tensor.hpp"

namespace ffl {

struct DenseLayer {
  std::string name;
  Index in = 0;
  Index out = 0;
  bool operator==(const DenseLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};

struct Conv2DLayer {
  std::string name;
  Index in_ch = 0;
  Index out_ch = 0;
  Index kernel = 0;
  Index stride = 1;
  bool operator==(const Conv2DLayer&) const = default;
};

struct MaxPool2DLayer {
  Index kernel = 0;
  bool operator==(const MaxPool2DLayer&) const = default;
};

struct FlattenLayer {
  bool operator==(const FlattenLayer&) const = default;
};

using LayerSpec = std::variant<DenseLayer, ReluLayer, Conv2DLayer, MaxPool2DLayer, FlattenLayer>;

/// Ordered layer stack plus the per-sample input shape (no batch dim).
struct ModelSpec {
  std::vector<Index> input_shape;
  std::vector<LayerSpec> layers;

  /// Throws std::invalid_argument if shapes do not compose or names repeat.
  void validate() const;

  /// Per-sample output shape after the last layer.
  std::vector<Index> outputShape() const;

  /// Flattened output dimension (the feature/label count).
  Index outputDim() const;

  /// Names of parameterized layers, in network order.
  std::vector<std::string> paramLayerNames() const;

  bool operator==(const ModelSpec& o) const = default;
};

/// Glorot-uniform weights, zero biases; deterministic per seed.
Parameters initParams(const ModelSpec& spec, std::uint64_t seed);

/// Logits for a batch. batch shape = (n, input_shape...).
Tensor forward(const ModelSpec& spec, const Parameters& params, const Tensor& batch);

struct LossConfig {
  std::vector<double> pos_weights;  // one per label, applied to the positive term
};

struct LossAndGrads {
  double loss = 0.0;
  Parameters grads;
};

/// Weighted multilabel BCE on logits, mean over batch and labels, with
/// exact analytic gradients for every parameter.
LossAndGrads lossAndGrads(const ModelSpec& spec, const Parameters& params,
                          const Tensor& batch, const Tensor& labels,
                          const LossConfig& cfg);

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) {
  return 1.0 / (1.0 + (-z).exp());
}

}  // namespace ffl

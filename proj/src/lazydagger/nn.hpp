#pragma once

#include "types.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ldg::nn {

enum class OutputActivation { Identity, Tanh, Sigmoid };

/// Fully connected network with rectifier hidden layers. Inputs and outputs
/// are column-major batches: one sample per column.
class Mlp {
 public:
  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };

  /// Activations kept from a forward pass for backpropagation.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
  };

  Mlp() = default;
  /// All parameters zero.
  Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static Mlp random(std::vector<std::size_t> layer_sizes,
                    OutputActivation output, std::uint64_t seed);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  OutputActivation output_activation() const { return output_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  /// Flattened as [W0 (column-major), b0, W1, b1, ...].
  Vector parameters() const;
  void set_parameters(const Vector& flat);

  /// Same layout as parameters(); ones at weight entries, zeros at biases.
  Vector weight_mask() const;
  double weight_norm_sq() const;

  Matrix forward(const Matrix& inputs) const;
  Matrix forward(const Matrix& inputs, Tape& tape) const;

  /// Gradient of a loss with respect to the flattened parameters, given the
  /// loss gradient with respect to the post-activation output.
  Vector backward(const Tape& tape, const Matrix& output_grad) const;

  /// Same, but the caller supplies the gradient with respect to the
  /// pre-activation output directly (used by losses with a fused derivative).
  Vector backward_from_logits(const Tape& tape, const Matrix& logit_grad) const;

  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<std::size_t> sizes_;
  OutputActivation output_ = OutputActivation::Identity;
  std::vector<Layer> layers_;
};

enum class OptimizerKind { Sgd, Adam };

/// Plain SGD or adaptive-moment estimation over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t size);

  void step(Vector& params, const Vector& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  Vector m_;
  Vector v_;
};

}  // namespace ldg::nn

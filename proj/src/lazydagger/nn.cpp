#include "nn.hpp"

#include "errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace ldg::nn {

namespace {

Matrix apply_output(OutputActivation act, const Matrix& z) {
  switch (act) {
    case OutputActivation::Tanh:
      return z.array().tanh().matrix();
    case OutputActivation::Sigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case OutputActivation::Identity:
      break;
  }
  return z;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) {
    throw ContractViolation("network needs at least an input and an output layer");
  }
  for (std::size_t s : sizes_) {
    if (s == 0) throw ContractViolation("layer sizes must be positive");
  }
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(sizes_[i]);
    const auto out = static_cast<Eigen::Index>(sizes_[i + 1]);
    layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  }
}

Mlp Mlp::random(std::vector<std::size_t> layer_sizes, OutputActivation output,
                std::uint64_t seed) {
  Mlp net(std::move(layer_sizes), output);
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = dist(rng);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = dist(rng);
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

Vector Mlp::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    flat.segment(at, layer.weight.size()) =
        Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    at += layer.weight.size();
    flat.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Vector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ContractViolation("parameter vector has " + std::to_string(flat.size()) +
                            " entries, network expects " +
                            std::to_string(parameter_count()));
  }
  Eigen::Index at = 0;
  for (auto& layer : layers_) {
    Eigen::Map<Vector>(layer.weight.data(), layer.weight.size()) =
        flat.segment(at, layer.weight.size());
    at += layer.weight.size();
    layer.bias = flat.segment(at, layer.bias.size());
    at += layer.bias.size();
  }
}

Vector Mlp::weight_mask() const {
  Vector mask(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    mask.segment(at, layer.weight.size()).setOnes();
    at += layer.weight.size();
    mask.segment(at, layer.bias.size()).setZero();
    at += layer.bias.size();
  }
  return mask;
}

double Mlp::weight_norm_sq() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.weight.squaredNorm();
  return total;
}

Matrix Mlp::forward(const Matrix& inputs) const {
  if (inputs.rows() != static_cast<Eigen::Index>(input_dim())) {
    throw ContractViolation("network input has dimension " +
                            std::to_string(inputs.rows()) + ", expected " +
                            std::to_string(input_dim()));
  }
  Matrix x = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = (layers_[i].weight * x).colwise() + layers_[i].bias;
    if (i + 1 < layers_.size()) {
      x = z.cwiseMax(0.0);
    } else {
      x = apply_output(output_, z);
    }
  }
  return x;
}

Matrix Mlp::forward(const Matrix& inputs, Tape& tape) const {
  if (inputs.rows() != static_cast<Eigen::Index>(input_dim())) {
    throw ContractViolation("network input has dimension " +
                            std::to_string(inputs.rows()) + ", expected " +
                            std::to_string(input_dim()));
  }
  tape.inputs.clear();
  tape.pre.clear();
  Matrix x = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    tape.inputs.push_back(x);
    Matrix z = (layers_[i].weight * x).colwise() + layers_[i].bias;
    tape.pre.push_back(z);
    if (i + 1 < layers_.size()) {
      x = z.cwiseMax(0.0);
    } else {
      x = apply_output(output_, z);
    }
  }
  tape.output = x;
  return x;
}

Vector Mlp::backward(const Tape& tape, const Matrix& output_grad) const {
  Matrix delta;
  switch (output_) {
    case OutputActivation::Tanh:
      delta = output_grad.array() * (1.0 - tape.output.array().square());
      break;
    case OutputActivation::Sigmoid:
      delta = output_grad.array() * tape.output.array() * (1.0 - tape.output.array());
      break;
    case OutputActivation::Identity:
      delta = output_grad;
      break;
  }
  return backward_from_logits(tape, delta);
}

Vector Mlp::backward_from_logits(const Tape& tape, const Matrix& logit_grad) const {
  Vector grad(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    offsets.push_back(at);
    at += layer.weight.size() + layer.bias.size();
  }

  Matrix delta = logit_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Matrix gw = delta * tape.inputs[k].transpose();
    const Eigen::Index off = offsets[k];
    grad.segment(off, gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
    grad.segment(off + gw.size(), layer.bias.size()) = delta.rowwise().sum();
    if (k > 0) {
      Matrix back = layer.weight.transpose() * delta;
      delta = (tape.pre[k - 1].array() > 0.0).select(back, 0.0);
    }
  }
  return grad;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t size)
    : kind_(kind),
      lr_(learning_rate),
      m_(Vector::Zero(static_cast<Eigen::Index>(size))),
      v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void Optimizer::step(Vector& params, const Vector& grad) {
  if (kind_ == OptimizerKind::Sgd) {
    params -= lr_ * grad;
    return;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  // Moments of dead units decay into subnormals, which are very slow on x86.
  constexpr double tiny = std::numeric_limits<double>::min();
  m_ = (m_.array().abs() < tiny).select(0.0, m_);
  v_ = (v_.array() < tiny).select(0.0, v_);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace ldg::nn

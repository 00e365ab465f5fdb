#include "safety.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ldg {

void ThresholdPair::validate() const {
  if (!(tau_sup >= 0.0) || !(tau_auto >= 0.0)) {
    throw ContractViolation("thresholds must be non-negative");
  }
  if (tau_auto > tau_sup) {
    throw ContractViolation("tau_auto must not exceed tau_sup");
  }
}

double discrepancy(const EnvAction& robot, const EnvAction& supervisor) {
  if (robot.dim() != supervisor.dim()) {
    throw ContractViolation("discrepancy: action dimensions differ (" +
                            std::to_string(robot.dim()) + " vs " +
                            std::to_string(supervisor.dim()) + ")");
  }
  return (robot.values - supervisor.values).norm();
}

SafetyLabel label_from_discrepancy(double d, double tau_sup) {
  if (!(tau_sup >= 0.0)) throw ContractViolation("tau_sup must be >= 0");
  return d >= tau_sup ? SafetyLabel::Unsafe : SafetyLabel::Safe;
}

SafetyLabel label(const EnvAction& robot, const EnvAction& supervisor, double tau_sup) {
  return label_from_discrepancy(discrepancy(robot, supervisor), tau_sup);
}

double bce_loss(double prediction, SafetyLabel target) {
  const double p = std::clamp(prediction, kBceEpsilon, 1.0 - kBceEpsilon);
  return target == SafetyLabel::Unsafe ? -std::log(p) : -std::log(1.0 - p);
}

DiscrepancyClassifier::DiscrepancyClassifier(nn::Mlp net) : net_(std::move(net)) {
  if (net_.output_activation() != nn::OutputActivation::Sigmoid || net_.output_dim() != 1) {
    throw ContractViolation("classifier needs a single sigmoid output");
  }
}

double DiscrepancyClassifier::predict(const EnvState& state) const {
  return net_.forward(state.values)(0, 0);
}

Vector DiscrepancyClassifier::predict_batch(const Matrix& states) const {
  return net_.forward(states).row(0).transpose();
}

DiscrepancyClassifier init_classifier(const std::vector<std::size_t>& layer_sizes,
                                      std::uint64_t seed) {
  if (layer_sizes.empty()) throw ContractViolation("layer list must not be empty");
  return DiscrepancyClassifier(
      nn::Mlp::random(layer_sizes, nn::OutputActivation::Sigmoid, seed));
}

double classifier_loss(const DiscrepancyClassifier& f, const Matrix& states,
                       const Vector& targets, double l2_coefficient) {
  if (states.cols() == 0) throw ContractViolation("batch must not be empty");
  const Vector p = f.predict_batch(states);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    total += bce_loss(p(i), targets(i) > 0.5 ? SafetyLabel::Unsafe : SafetyLabel::Safe);
  }
  return total / static_cast<double>(p.size()) +
         l2_coefficient * f.network().weight_norm_sq();
}

Vector classifier_gradient(const DiscrepancyClassifier& f, const Matrix& states,
                           const Vector& targets, double l2_coefficient, double* loss) {
  if (states.cols() == 0) throw ContractViolation("batch must not be empty");
  nn::Mlp::Tape tape;
  f.network().forward(states, tape);
  const auto n = static_cast<double>(states.cols());
  if (loss != nullptr) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
      total += bce_loss(tape.output(0, i),
                        targets(i) > 0.5 ? SafetyLabel::Unsafe : SafetyLabel::Safe);
    }
    *loss = total / n + l2_coefficient * f.network().weight_norm_sq();
  }
  // d BCE / d logit = p - y, except where the clamp is active.
  Matrix logit_grad(1, states.cols());
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    const double p = tape.output(0, i);
    const bool clamped = p < kBceEpsilon || p > 1.0 - kBceEpsilon;
    logit_grad(0, i) = clamped ? 0.0 : (p - targets(i)) / n;
  }
  Vector grad = f.network().backward_from_logits(tape, logit_grad);
  if (l2_coefficient != 0.0) {
    grad += 2.0 * l2_coefficient *
            f.network().parameters().cwiseProduct(f.network().weight_mask());
  }
  return grad;
}

Vector safety_targets(const RobotPolicy& policy, const Dataset& data, double tau_sup) {
  const Matrix robot = policy.forward_batch(data.states());
  const Matrix sup = data.actions();
  const Vector d = (robot - sup).colwise().norm().transpose();
  return (d.array() >= tau_sup).cast<double>().matrix();
}

ClassifierTrainResult train_classifier_on(DiscrepancyClassifier classifier,
                                          const Matrix& states, const Vector& targets,
                                          const TrainConfig& config, std::uint64_t seed) {
  if (states.cols() == 0) throw ContractViolation("train_classifier: dataset is empty");
  config.validate("classifier");
  ClassifierTrainResult result;
  result.unsafe_fraction = targets.mean();
  result.single_class = targets.minCoeff() == targets.maxCoeff();
  result.loss_curve.reserve(config.gradient_steps_per_epoch);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, states.cols() - 1);
  nn::Optimizer opt(config.optimizer, config.learning_rate,
                    classifier.network().parameter_count());
  Vector params = classifier.network().parameters();
  const auto b = static_cast<Eigen::Index>(config.batch_size);
  Matrix s(states.rows(), b);
  Vector y(b);
  for (std::size_t step = 0; step < config.gradient_steps_per_epoch; ++step) {
    for (Eigen::Index j = 0; j < b; ++j) {
      const Eigen::Index k = pick(rng);
      s.col(j) = states.col(k);
      y(j) = targets(k);
    }
    double loss = 0.0;
    const Vector grad = classifier_gradient(classifier, s, y, config.l2_coefficient, &loss);
    result.loss_curve.push_back(loss);
    opt.step(params, grad);
    classifier.network().set_parameters(params);
  }
  result.classifier = std::move(classifier);
  return result;
}

ClassifierTrainResult train_classifier(DiscrepancyClassifier classifier, const Dataset& data,
                                       const RobotPolicy& policy, double tau_sup,
                                       const TrainConfig& config, std::uint64_t seed) {
  if (data.empty()) throw ContractViolation("train_classifier: dataset is empty");
  return train_classifier_on(std::move(classifier), data.states(),
                             safety_targets(policy, data, tau_sup), config, seed);
}

Calibration calibrate_from_discrepancies(std::vector<double> d, double target_fraction) {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw ContractViolation("target fraction must lie strictly between 0 and 1");
  }
  if (d.empty()) throw ContractViolation("calibration needs at least one sample");
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const auto wanted = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(target_fraction * static_cast<double>(n))), 1, n);

  Calibration c;
  c.samples = n;
  c.tau_sup = d[n - wanted];
  const auto at_or_above = static_cast<std::size_t>(
      d.end() - std::lower_bound(d.begin(), d.end(), c.tau_sup));
  c.unsafe_fraction = static_cast<double>(at_or_above) / static_cast<double>(n);

  if (static_cast<double>(n) < 1.0 / target_fraction) {
    c.warning = true;
    c.reason = "dataset has fewer than 1/target_fraction samples";
  }
  if (std::abs(c.unsafe_fraction - target_fraction) > 1.0 / static_cast<double>(n)) {
    c.warning = true;
    if (!c.reason.empty()) c.reason += "; ";
    c.reason += "tied discrepancies; achieved unsafe fraction " +
                std::to_string(c.unsafe_fraction);
  }
  return c;
}

Calibration calibrate_tau_sup(const RobotPolicy& policy, const Dataset& offline,
                              double target_fraction) {
  if (offline.empty()) throw ContractViolation("calibration dataset is empty");
  const Matrix robot = policy.forward_batch(offline.states());
  const Vector d = (robot - offline.actions()).colwise().norm().transpose();
  return calibrate_from_discrepancies(std::vector<double>(d.data(), d.data() + d.size()),
                                      target_fraction);
}

}  // namespace ldg

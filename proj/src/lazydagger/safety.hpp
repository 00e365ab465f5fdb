#pragma once

#include "nn.hpp"
#include "policy.hpp"
#include "types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ldg {

enum class SafetyLabel : std::uint8_t { Safe = 0, Unsafe = 1 };

/// Entry (tau_sup) and exit (tau_auto) discrepancy thresholds. tau_auto must
/// not exceed tau_sup. The same struct is used for fractions of the maximum
/// action discrepancy and for absolute action units; see scaled().
struct ThresholdPair {
  double tau_sup = 0.0;
  double tau_auto = 0.0;

  void validate() const;
  ThresholdPair scaled(double factor) const { return {tau_sup * factor, tau_auto * factor}; }
};

/// Euclidean distance between two actions.
double discrepancy(const EnvAction& robot, const EnvAction& supervisor);

/// Unsafe iff discrepancy >= tau_sup (boundary inclusive).
SafetyLabel label(const EnvAction& robot, const EnvAction& supervisor, double tau_sup);
SafetyLabel label_from_discrepancy(double d, double tau_sup);

inline constexpr double kBceEpsilon = 1e-7;

/// Binary cross-entropy with the prediction clamped to [eps, 1 - eps].
double bce_loss(double prediction, SafetyLabel target);

/// Sigmoid-output network over states predicting whether the robot policy
/// disagrees with the supervisor by at least tau_sup.
class DiscrepancyClassifier {
 public:
  DiscrepancyClassifier() = default;
  explicit DiscrepancyClassifier(nn::Mlp net);

  const nn::Mlp& network() const { return net_; }
  nn::Mlp& network() { return net_; }

  double predict(const EnvState& state) const;
  Vector predict_batch(const Matrix& states) const;

 private:
  nn::Mlp net_;
};

inline const std::vector<std::size_t> kClassifierHidden{32, 32};

DiscrepancyClassifier init_classifier(const std::vector<std::size_t>& layer_sizes,
                                      std::uint64_t seed);

/// Mean BCE over the batch plus L2 weight penalty. `targets` holds 0/1.
double classifier_loss(const DiscrepancyClassifier& f, const Matrix& states,
                       const Vector& targets, double l2_coefficient);
Vector classifier_gradient(const DiscrepancyClassifier& f, const Matrix& states,
                           const Vector& targets, double l2_coefficient, double* loss = nullptr);

/// 0/1 targets for every state: label(policy(s), a_sup, tau_sup).
Vector safety_targets(const RobotPolicy& policy, const Dataset& data, double tau_sup);

struct ClassifierTrainResult {
  DiscrepancyClassifier classifier;
  std::vector<double> loss_curve;
  double unsafe_fraction = 0.0;
  bool single_class = false;  // every target had the same label
};

/// Minibatch BCE training on labels recomputed with the current policy.
ClassifierTrainResult train_classifier(DiscrepancyClassifier classifier, const Dataset& data,
                                       const RobotPolicy& policy, double tau_sup,
                                       const TrainConfig& config, std::uint64_t seed);

/// Same, with caller-provided targets.
ClassifierTrainResult train_classifier_on(DiscrepancyClassifier classifier,
                                          const Matrix& states, const Vector& targets,
                                          const TrainConfig& config, std::uint64_t seed);

struct Calibration {
  double tau_sup = 0.0;         // absolute units
  double unsafe_fraction = 0.0; // fraction of the data with d >= tau_sup
  std::size_t samples = 0;
  bool warning = false;
  std::string reason;
};

/// Picks tau so that the fraction of discrepancies at or above it is as close
/// as possible to target_fraction.
Calibration calibrate_from_discrepancies(std::vector<double> discrepancies,
                                         double target_fraction);

Calibration calibrate_tau_sup(const RobotPolicy& policy, const Dataset& offline,
                              double target_fraction);

}  // namespace ldg

#pragma once

#include "nn.hpp"
#include "types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ldg {

class Environment;

struct LabeledPair {
  EnvState state;
  EnvAction supervisor_action;
};

/// Append-only collection of supervisor-labelled states. Each pair carries a
/// provenance tag: -1 for offline data, otherwise the online epoch index.
class Dataset {
 public:
  static constexpr int kOffline = -1;

  void append(LabeledPair pair, int provenance = kOffline);
  void append_all(const Dataset& other);

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const LabeledPair& operator[](std::size_t i) const { return pairs_[i]; }
  int provenance(std::size_t i) const { return provenance_[i]; }
  std::size_t count_online() const;

  const std::vector<LabeledPair>& pairs() const { return pairs_; }

  Matrix states() const;   // state_dim x n
  Matrix actions() const;  // action_dim x n

  nlohmann::json to_json() const;
  static Dataset from_json(const nlohmann::json& doc);

 private:
  std::vector<LabeledPair> pairs_;
  std::vector<int> provenance_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t gradient_steps_per_epoch = 500;
  double l2_coefficient = 1e-5;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;

  void validate(const std::string& path) const;
};

/// The robot policy: rectifier hidden layers and a tanh output rescaled to
/// the action box, so every output is inside [a_low, a_high].
class RobotPolicy {
 public:
  RobotPolicy() = default;
  RobotPolicy(nn::Mlp net, Vector action_low, Vector action_high, std::uint64_t seed);

  const nn::Mlp& network() const { return net_; }
  nn::Mlp& network() { return net_; }
  const Vector& action_low() const { return low_; }
  const Vector& action_high() const { return high_; }
  std::uint64_t seed() const { return seed_; }

  EnvAction forward(const EnvState& state) const;
  /// Batched forward: states are columns.
  Matrix forward_batch(const Matrix& states) const;
  Matrix forward_batch(const Matrix& states, nn::Mlp::Tape& tape) const;

  Vector half_range() const { return (high_ - low_) / 2.0; }
  Vector midpoint() const { return (high_ + low_) / 2.0; }

 private:
  nn::Mlp net_;
  Vector low_;
  Vector high_;
  std::uint64_t seed_ = 0;
};

RobotPolicy init_policy(const std::vector<std::size_t>& layer_sizes, const Vector& action_low,
                        const Vector& action_high, std::uint64_t seed);

/// Default hidden widths for the robot policy.
inline const std::vector<std::size_t> kPolicyHidden{64, 64};

/// Mean squared Euclidean distance between policy and labels plus the L2
/// weight penalty.
double bc_loss(const RobotPolicy& policy, const Matrix& states, const Matrix& labels,
               double l2_coefficient);
double bc_loss(const RobotPolicy& policy, std::span<const LabeledPair> batch,
               double l2_coefficient);

/// Exact gradient of bc_loss with respect to the flattened parameters.
Vector bc_gradient(const RobotPolicy& policy, const Matrix& states, const Matrix& labels,
                   double l2_coefficient, double* loss = nullptr);
Vector bc_gradient(const RobotPolicy& policy, std::span<const LabeledPair> batch,
                   double l2_coefficient);

struct TrainResult {
  RobotPolicy policy;
  std::vector<double> loss_curve;  // minibatch loss before each update
};

/// Runs config.gradient_steps_per_epoch minibatch updates, sampling with
/// replacement, starting from the given parameters.
TrainResult train_bc(RobotPolicy policy, const Dataset& dataset, const TrainConfig& config,
                     std::uint64_t seed);

/// Random disjoint partition; the first part has round(fraction * n) pairs.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double fraction,
                                          std::uint64_t seed);

/// Rolls out the supervisor from seeded starts until `pairs` labels exist.
/// With sigma2 > 0 the executed action is perturbed by N(0, sigma2 I) while
/// the clean label is stored.
Dataset collect_supervisor_data(const Environment& env, std::size_t pairs,
                                std::uint64_t seed, int provenance = Dataset::kOffline,
                                double sigma2 = 0.0);

/// Mean Euclidean discrepancy between policy and supervisor on the given states.
double mean_discrepancy(const RobotPolicy& policy, const Environment& env,
                        std::span<const EnvState> states);

// Checkpoints -----------------------------------------------------------------

nlohmann::json network_to_json(const nn::Mlp& net, std::string_view kind);
nn::Mlp network_from_json(const nlohmann::json& doc, std::string_view expected_kind);

nlohmann::json to_json(const RobotPolicy& policy);
RobotPolicy policy_from_json(const nlohmann::json& doc);

void save_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json load_json(const std::filesystem::path& path);

void save_policy(const std::filesystem::path& path, const RobotPolicy& policy);
RobotPolicy load_policy(const std::filesystem::path& path);

/// SHA-256 of the raw parameter bytes and shape; equal hashes mean
/// bit-identical networks.
std::string parameter_hash(const nn::Mlp& net);

}  // namespace ldg

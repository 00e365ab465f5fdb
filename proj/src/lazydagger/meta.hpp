#pragma once

#include "env.hpp"
#include "episode_log.hpp"
#include "policy.hpp"
#include "safety.hpp"
#include "types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace ldg {

enum class Algorithm { BehaviorCloning, DAgger, SafeDAgger, LazyDAgger };

std::string_view to_string(Algorithm algorithm);

/// Loop parameters shared by the interactive algorithms. Thresholds are in
/// absolute action units here; the harness converts from fractions.
struct LazyConfig {
  int epochs = 10;            // N
  int steps_per_epoch = 1000; // T
  ThresholdPair thresholds;
  double sigma2 = 0.0;        // executed-action noise variance, action units squared
  bool update_policy = true;
  bool inject_noise = true;

  /// Frozen policy, no noise.
  static LazyConfig execution(int epochs, int steps_per_epoch, ThresholdPair thresholds);

  void validate() const;
};

struct TrainConfigs {
  TrainConfig policy;
  TrainConfig classifier;
};

struct SupervisorQuery {
  const EnvState& state;
  const EnvAction& robot_action;
  int epoch = 0;
  int episode = 0;
  int t = 0;
};

/// Counters broadcast to an attached console.
struct RunningCounts {
  std::size_t switches = 0;
  std::size_t supervisor_actions = 0;
};

/// Source of supervisor labels: the analytic controller or a remote human.
class SupervisorHandle {
 public:
  enum class Kind { Analytic, RemoteHuman };

  virtual ~SupervisorHandle() = default;
  virtual Kind kind() const = 0;

  /// May block (remote human). Throws SupervisorUnavailable on timeout or
  /// disconnect.
  virtual EnvAction query(const SupervisorQuery& query) = 0;

  virtual void on_episode_start(int /*epoch*/, int /*episode*/, const EnvState& /*state*/) {}
  virtual void on_step(const StepRecord& /*record*/, Mode /*next_mode*/,
                       const RunningCounts& /*counts*/) {}
};

class AnalyticSupervisor final : public SupervisorHandle {
 public:
  explicit AnalyticSupervisor(const Environment& env) : env_(env) {}
  Kind kind() const override { return Kind::Analytic; }
  EnvAction query(const SupervisorQuery& q) override { return env_.supervisor_action(q.state); }

 private:
  const Environment& env_;
};

/// Autonomous iff f < 0.5.
Mode safedagger_select(double f_prediction);

/// a + eps with eps ~ N(0, sigma2 I); not clipped.
EnvAction inject_noise(const EnvAction& action, double sigma2, std::mt19937_64& rng);
/// Same, clipped to [low, high].
EnvAction inject_noise(const EnvAction& action, double sigma2, std::mt19937_64& rng,
                       const Vector& low, const Vector& high);

struct StepDecision {
  EnvAction executed;
  Mode next_mode = Mode::Autonomous;
  StepRecord record;
  std::optional<LabeledPair> new_pair;
};

struct StepContext {
  int epoch = 0;
  int episode = 0;
  int t = 0;
};

/// One iteration of the LazyDAgger inner loop.
StepDecision lazydagger_step(Mode mode, const EnvState& state, const RobotPolicy& policy,
                             const DiscrepancyClassifier& classifier,
                             SupervisorHandle& supervisor, const Environment& env,
                             const LazyConfig& config, std::mt19937_64& rng,
                             StepContext ctx = {});

/// One SafeDAgger step: the classifier alone decides the mode, in both
/// directions; no noise.
StepDecision safedagger_step(const EnvState& state, const RobotPolicy& policy,
                             const DiscrepancyClassifier& classifier,
                             SupervisorHandle& supervisor, StepContext ctx = {});

/// One DAgger step: the robot acts, the supervisor labels every state.
StepDecision dagger_step(const EnvState& state, const RobotPolicy& policy,
                         SupervisorHandle& supervisor, StepContext ctx = {});

struct LearnerState {
  RobotPolicy policy;
  DiscrepancyClassifier classifier;
  Dataset policy_data;  // D, grows online
  Dataset safe_data;    // D_safe, frozen after the split
};

struct EpochResult {
  int epoch = 0;
  std::vector<EpisodeLog> logs;
  std::size_t new_pairs = 0;
  std::vector<double> policy_loss;
  std::vector<double> classifier_loss;
  bool classifier_single_class = false;
};

/// Runs the algorithm one epoch at a time: T environment steps, then the
/// per-epoch refits. Holding the state between epochs lets callers checkpoint.
class InteractiveSession {
 public:
  InteractiveSession(Algorithm algorithm, const Environment& env, SupervisorHandle& supervisor,
                     LazyConfig config, TrainConfigs train, LearnerState state,
                     std::uint64_t seed);

  EpochResult run_epoch(int epoch);

  const LearnerState& state() const { return state_; }
  LearnerState& state() { return state_; }
  const LazyConfig& config() const { return config_; }
  Algorithm algorithm() const { return algorithm_; }

 private:
  StepDecision decide(Mode mode, const EnvState& state, std::mt19937_64& noise_rng,
                      StepContext ctx);
  void refit(int epoch, EpochResult& result);

  Algorithm algorithm_;
  const Environment& env_;
  SupervisorHandle& supervisor_;
  LazyConfig config_;
  TrainConfigs train_;
  LearnerState state_;
  std::uint64_t seed_;
};

struct RunResult {
  RobotPolicy policy;
  DiscrepancyClassifier classifier;
  std::vector<EpisodeLog> logs;
  Dataset policy_data;
};

RunResult run_lazydagger(const Environment& env, LearnerState initial,
                         SupervisorHandle& supervisor, const LazyConfig& config,
                         const TrainConfigs& train, std::uint64_t seed);

RunResult run_safedagger(const Environment& env, LearnerState initial,
                         SupervisorHandle& supervisor, const LazyConfig& config,
                         const TrainConfigs& train, std::uint64_t seed);

RunResult run_dagger(const Environment& env, LearnerState initial,
                     SupervisorHandle& supervisor, const LazyConfig& config,
                     const TrainConfigs& train, std::uint64_t seed);

/// Offline training only: config.epochs rounds of train_bc on the dataset.
RobotPolicy run_bc(RobotPolicy policy, const Dataset& dataset, const LazyConfig& config,
                   const TrainConfig& train, std::uint64_t seed);

/// Rollout of the robot policy alone, no interventions.
EpisodeLog test_rollout(const Environment& env, const RobotPolicy& policy, std::uint64_t seed,
                        int epoch, int index);

}  // namespace ldg

#include "meta.hpp"

#include "errors.hpp"

#include <chrono>
#include <cmath>

namespace ldg {

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

StepRecord base_record(const EnvState& state, const EnvAction& robot, StepContext ctx) {
  StepRecord r;
  r.t = ctx.t;
  r.state = state;
  r.robot_action = robot;
  r.wall_ns = now_ns();
  return r;
}

bool uses_classifier(Algorithm a) {
  return a == Algorithm::SafeDAgger || a == Algorithm::LazyDAgger;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::BehaviorCloning: return "bc";
    case Algorithm::DAgger: return "dagger";
    case Algorithm::SafeDAgger: return "safedagger";
    case Algorithm::LazyDAgger: return "lazydagger";
  }
  return "unknown";
}

LazyConfig LazyConfig::execution(int epochs, int steps_per_epoch, ThresholdPair thresholds) {
  LazyConfig c;
  c.epochs = epochs;
  c.steps_per_epoch = steps_per_epoch;
  c.thresholds = thresholds;
  c.sigma2 = 0.0;
  c.update_policy = false;
  c.inject_noise = false;
  return c;
}

void LazyConfig::validate() const {
  if (epochs < 0) throw ContractViolation("epochs must be >= 0");
  if (steps_per_epoch < 0) throw ContractViolation("steps per epoch must be >= 0");
  if (!(sigma2 >= 0.0)) throw ContractViolation("sigma2 must be >= 0");
  thresholds.validate();
}

Mode safedagger_select(double f_prediction) {
  return f_prediction < 0.5 ? Mode::Autonomous : Mode::Supervisor;
}

EnvAction inject_noise(const EnvAction& action, double sigma2, std::mt19937_64& rng) {
  if (!(sigma2 >= 0.0)) throw ContractViolation("sigma2 must be >= 0");
  if (sigma2 == 0.0) return action;
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
  EnvAction out = action;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) out.values(i) += normal(rng);
  return out;
}

EnvAction inject_noise(const EnvAction& action, double sigma2, std::mt19937_64& rng,
                       const Vector& low, const Vector& high) {
  EnvAction out = inject_noise(action, sigma2, rng);
  out.values = out.values.cwiseMax(low).cwiseMin(high);
  return out;
}

StepDecision lazydagger_step(Mode mode, const EnvState& state, const RobotPolicy& policy,
                             const DiscrepancyClassifier& classifier,
                             SupervisorHandle& supervisor, const Environment& env,
                             const LazyConfig& config, std::mt19937_64& rng, StepContext ctx) {
  StepDecision out;
  const EnvAction robot = policy.forward(state);
  const double f = classifier.predict(state);
  out.record = base_record(state, robot, ctx);
  out.record.f_prediction = f;

  if (mode == Mode::Supervisor || f >= 0.5) {
    EnvAction sup = supervisor.query({state, robot, ctx.epoch, ctx.episode, ctx.t});
    const double d = discrepancy(robot, sup);
    // The clean label is stored; only the executed action is perturbed.
    out.new_pair = LabeledPair{state, sup};
    out.executed = config.inject_noise
                       ? inject_noise(sup, config.sigma2, rng, env.spec().action_low,
                                      env.spec().action_high)
                       : sup;
    out.next_mode = d < config.thresholds.tau_auto ? Mode::Autonomous : Mode::Supervisor;
    out.record.mode = Mode::Supervisor;
    out.record.supervisor_action = std::move(sup);
    out.record.discrepancy = d;
  } else {
    out.executed = robot;
    out.next_mode = Mode::Autonomous;
    out.record.mode = Mode::Autonomous;
  }
  out.record.executed_action = out.executed;
  return out;
}

StepDecision safedagger_step(const EnvState& state, const RobotPolicy& policy,
                             const DiscrepancyClassifier& classifier,
                             SupervisorHandle& supervisor, StepContext ctx) {
  StepDecision out;
  const EnvAction robot = policy.forward(state);
  const double f = classifier.predict(state);
  out.record = base_record(state, robot, ctx);
  out.record.f_prediction = f;
  out.record.mode = safedagger_select(f);
  if (out.record.mode == Mode::Supervisor) {
    EnvAction sup = supervisor.query({state, robot, ctx.epoch, ctx.episode, ctx.t});
    out.record.discrepancy = discrepancy(robot, sup);
    out.new_pair = LabeledPair{state, sup};
    out.executed = sup;
    out.record.supervisor_action = std::move(sup);
  } else {
    out.executed = robot;
  }
  // The next step is gated afresh by f, so the carried mode is informational.
  out.next_mode = out.record.mode;
  out.record.executed_action = out.executed;
  return out;
}

StepDecision dagger_step(const EnvState& state, const RobotPolicy& policy,
                         SupervisorHandle& supervisor, StepContext ctx) {
  StepDecision out;
  const EnvAction robot = policy.forward(state);
  out.record = base_record(state, robot, ctx);
  EnvAction sup = supervisor.query({state, robot, ctx.epoch, ctx.episode, ctx.t});
  // Every state is labelled, so for burden accounting every step is a
  // supervisor step even though the robot's action is executed.
  out.record.mode = Mode::Supervisor;
  out.record.discrepancy = discrepancy(robot, sup);
  out.new_pair = LabeledPair{state, sup};
  out.record.supervisor_action = std::move(sup);
  out.executed = robot;
  out.next_mode = Mode::Supervisor;
  out.record.executed_action = out.executed;
  return out;
}

// --------------------------------------------------------- InteractiveSession

InteractiveSession::InteractiveSession(Algorithm algorithm, const Environment& env,
                                       SupervisorHandle& supervisor, LazyConfig config,
                                       TrainConfigs train, LearnerState state,
                                       std::uint64_t seed)
    : algorithm_(algorithm),
      env_(env),
      supervisor_(supervisor),
      config_(config),
      train_(train),
      state_(std::move(state)),
      seed_(seed) {
  config_.validate();
}

StepDecision InteractiveSession::decide(Mode mode, const EnvState& state,
                                        std::mt19937_64& noise_rng, StepContext ctx) {
  switch (algorithm_) {
    case Algorithm::LazyDAgger:
      return lazydagger_step(mode, state, state_.policy, state_.classifier, supervisor_, env_,
                             config_, noise_rng, ctx);
    case Algorithm::SafeDAgger:
      return safedagger_step(state, state_.policy, state_.classifier, supervisor_, ctx);
    case Algorithm::DAgger:
      return dagger_step(state, state_.policy, supervisor_, ctx);
    case Algorithm::BehaviorCloning:
      break;
  }
  throw ContractViolation("behavior cloning has no interactive step");
}

EpochResult InteractiveSession::run_epoch(int epoch) {
  EpochResult result;
  result.epoch = epoch;
  if (algorithm_ != Algorithm::BehaviorCloning) {
    std::mt19937_64 noise_rng(derive_seed(seed_, streams::kNoise, static_cast<std::uint64_t>(epoch)));
    RunningCounts counts;
    int steps = 0;
    for (int k = 0; steps < config_.steps_per_epoch; ++k) {
      EpisodeLog log;
      log.phase = EpisodeLog::Phase::Train;
      log.epoch = epoch;
      log.episode = k;
      log.seed = derive_seed(seed_, streams::kEpisode, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(k));
      EnvState state = env_.reset(log.seed);
      Mode mode = Mode::Autonomous;
      supervisor_.on_episode_start(epoch, k, state);
      bool done = false;
      for (int t = 0; !done && steps < config_.steps_per_epoch; ++t, ++steps) {
        StepDecision decision = decide(mode, state, noise_rng, {epoch, k, t});
        StepOutcome outcome = env_.step(state, decision.executed, t);

        const bool prev_supervised = !log.records.empty() && log.records.back().mode == Mode::Supervisor;
        if ((decision.record.mode == Mode::Supervisor) != prev_supervised) ++counts.switches;
        if (decision.record.mode == Mode::Supervisor) ++counts.supervisor_actions;
        if (decision.new_pair) {
          state_.policy_data.append(std::move(*decision.new_pair), epoch);
          ++result.new_pairs;
        }
        supervisor_.on_step(decision.record, decision.next_mode, counts);
        log.records.push_back(std::move(decision.record));
        log.total_return += outcome.info.reward;
        log.collision = log.collision || outcome.info.collision;
        state = std::move(outcome.next_state);
        mode = decision.next_mode;
        if (outcome.done) {
          done = true;
          log.success = outcome.info.success;
        }
      }
      if (!log.records.empty() && log.records.back().mode == Mode::Supervisor) ++counts.switches;
      log.truncated = !done;
      result.logs.push_back(std::move(log));
    }
  }
  refit(epoch, result);
  return result;
}

void InteractiveSession::refit(int epoch, EpochResult& result) {
  if (!config_.update_policy) return;
  const auto e = static_cast<std::uint64_t>(epoch);
  TrainResult fit = train_bc(std::move(state_.policy), state_.policy_data, train_.policy,
                             derive_seed(seed_, streams::kPolicyFit, e));
  state_.policy = std::move(fit.policy);
  result.policy_loss = std::move(fit.loss_curve);
  if (uses_classifier(algorithm_)) {
    Dataset all = state_.policy_data;
    all.append_all(state_.safe_data);
    ClassifierTrainResult cfit =
        train_classifier(std::move(state_.classifier), all, state_.policy,
                         config_.thresholds.tau_sup, train_.classifier,
                         derive_seed(seed_, streams::kClassifierFit, e));
    state_.classifier = std::move(cfit.classifier);
    result.classifier_loss = std::move(cfit.loss_curve);
    result.classifier_single_class = cfit.single_class;
  }
}

namespace {

RunResult run_algorithm(Algorithm algorithm, const Environment& env, LearnerState initial,
                        SupervisorHandle& supervisor, const LazyConfig& config,
                        const TrainConfigs& train, std::uint64_t seed) {
  InteractiveSession session(algorithm, env, supervisor, config, train, std::move(initial), seed);
  RunResult out;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochResult r = session.run_epoch(epoch);
    for (auto& log : r.logs) out.logs.push_back(std::move(log));
  }
  out.policy = session.state().policy;
  out.classifier = session.state().classifier;
  out.policy_data = session.state().policy_data;
  return out;
}

}  // namespace

RunResult run_lazydagger(const Environment& env, LearnerState initial,
                         SupervisorHandle& supervisor, const LazyConfig& config,
                         const TrainConfigs& train, std::uint64_t seed) {
  return run_algorithm(Algorithm::LazyDAgger, env, std::move(initial), supervisor, config,
                       train, seed);
}

RunResult run_safedagger(const Environment& env, LearnerState initial,
                         SupervisorHandle& supervisor, const LazyConfig& config,
                         const TrainConfigs& train, std::uint64_t seed) {
  LazyConfig c = config;
  c.inject_noise = false;
  return run_algorithm(Algorithm::SafeDAgger, env, std::move(initial), supervisor, c, train,
                       seed);
}

RunResult run_dagger(const Environment& env, LearnerState initial,
                     SupervisorHandle& supervisor, const LazyConfig& config,
                     const TrainConfigs& train, std::uint64_t seed) {
  return run_algorithm(Algorithm::DAgger, env, std::move(initial), supervisor, config, train,
                       seed);
}

RobotPolicy run_bc(RobotPolicy policy, const Dataset& dataset, const LazyConfig& config,
                   const TrainConfig& train, std::uint64_t seed) {
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    policy = train_bc(std::move(policy), dataset, train,
                      derive_seed(seed, streams::kPolicyFit, static_cast<std::uint64_t>(epoch)))
                 .policy;
  }
  return policy;
}

EpisodeLog test_rollout(const Environment& env, const RobotPolicy& policy, std::uint64_t seed,
                        int epoch, int index) {
  EpisodeLog log;
  log.phase = EpisodeLog::Phase::Test;
  log.epoch = epoch;
  log.episode = index;
  log.seed = seed;
  EnvState state = env.reset(seed);
  for (int t = 0; t < env.spec().horizon; ++t) {
    StepRecord r;
    r.t = t;
    r.mode = Mode::Autonomous;
    r.state = state;
    r.robot_action = policy.forward(state);
    r.executed_action = r.robot_action;
    r.wall_ns = now_ns();
    StepOutcome out = env.step(state, r.executed_action, t);
    log.records.push_back(std::move(r));
    log.total_return += out.info.reward;
    log.collision = log.collision || out.info.collision;
    state = std::move(out.next_state);
    if (out.done) {
      log.success = out.info.success;
      return log;
    }
  }
  log.truncated = true;
  return log;
}

}  // namespace ldg

#pragma once

#include "types.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace ldg {

struct EnvSpec {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  int horizon = 1;  // T, steps per episode
  Vector action_low;
  Vector action_high;
  double dt = 0.1;  // seconds per step
};

struct StepInfo {
  bool success = false;
  bool collision = false;
  double reward = 0.0;
};

struct StepOutcome {
  EnvState next_state;
  bool done = false;
  StepInfo info;
};

/// A deterministic continuous-control task with an analytic supervisor.
/// Implementations are immutable after construction, so one instance can be
/// shared by concurrent rollouts.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual const EnvSpec& spec() const = 0;

  virtual EnvState reset(std::uint64_t seed) const = 0;

  /// Advances one step. `t` is the zero-based index of this step within the
  /// episode; done fires no later than t = horizon - 1.
  virtual StepOutcome step(const EnvState& state, const EnvAction& action,
                           int t) const = 0;

  /// The deterministic supervisor policy.
  virtual EnvAction supervisor_action(const EnvState& state) const = 0;

  /// Resolved parameters, echoed into manifests.
  virtual nlohmann::json params() const = 0;

  /// Static geometry for a console renderer.
  virtual nlohmann::json scene() const = 0;

  EnvAction clip(const EnvAction& action) const;

  /// Euclidean length of the action box diagonal, ||a_high - a_low||.
  double max_action_discrepancy() const;

  void check_state(const EnvState& state) const;
  void check_action(const EnvAction& action) const;
};

/// One-dimensional set-point tracking: x' = x + clip(a) dt, supervisor
/// a = clip(k_p (x_ref - x)). Success when |x - x_ref| <= tolerance at the
/// end of the episode.
class LineTrack1D final : public Environment {
 public:
  struct Params {
    double x_ref = 0.0;
    double k_p = 1.0;
    double dt = 0.1;
    int horizon = 50;
    double start_low = -1.0;
    double start_high = 1.0;
    double tolerance = 0.05;
  };

  explicit LineTrack1D(Params params);
  LineTrack1D() : LineTrack1D(Params{}) {}

  std::string_view id() const override { return "line_track_1d"; }
  const EnvSpec& spec() const override { return spec_; }
  EnvState reset(std::uint64_t seed) const override;
  StepOutcome step(const EnvState& state, const EnvAction& action, int t) const override;
  EnvAction supervisor_action(const EnvState& state) const override;
  nlohmann::json params() const override;
  nlohmann::json scene() const override;

  const Params& parameters() const { return params_; }

 private:
  Params params_;
  EnvSpec spec_;
};

/// Point robot in [-1, 1]^2 that must reach a goal on the far side of a wall.
/// The wall is a vertical band with a narrow gap. State is
/// (x, y, goal_x, goal_y); action is a planar velocity command.
///
/// Supervisor: clip(k_p (goal - p)) everywhere except the corridor region just
/// in front of and inside the wall. There it switches to a high lateral gain
/// toward the gap centerline and scales forward motion by how well the robot
/// is aligned with the gap, so it never touches the wall.
class PointGoal2D final : public Environment {
 public:
  struct Params {
    double k_p = 10.0;
    double corridor_gain = 8.0;
    double dt = 0.1;
    int horizon = 60;
    double goal_radius = 0.05;
    double wall_x = 0.0;
    double wall_half_thickness = 0.3;
    double gap_center = 0.0;
    double gap_half_width = 0.04;
    double corridor_length = 0.1;  // extent of the corridor region before the wall
    double corridor_amplitude = 0.25;  // lateral amplitude of a winding channel
    double corridor_half_waves = 4.0;
    double corridor_speed = 0.5;      // forward speed cap inside the wall
    bool terminal_collision = false;  // otherwise the wall blocks the move
    bool stop_at_goal = false;        // otherwise success is judged at the horizon
    double start_x_low = -0.9, start_x_high = -0.45;
    double start_y_low = -0.8, start_y_high = 0.8;
    double goal_x_low = 0.45, goal_x_high = 0.9;
    double goal_y_low = -0.8, goal_y_high = 0.8;
  };

  explicit PointGoal2D(Params params);
  PointGoal2D() : PointGoal2D(Params{}) {}

  std::string_view id() const override { return "point_goal_2d"; }
  const EnvSpec& spec() const override { return spec_; }
  EnvState reset(std::uint64_t seed) const override;
  StepOutcome step(const EnvState& state, const EnvAction& action, int t) const override;
  EnvAction supervisor_action(const EnvState& state) const override;
  nlohmann::json params() const override;
  nlohmann::json scene() const override;

  const Params& parameters() const { return params_; }

  bool in_corridor_region(double x) const;
  bool hits_wall(double x, double y) const;
  /// Channel centerline through the wall; constant before and after it.
  double centerline(double x) const;

 private:
  Params params_;
  EnvSpec spec_;
};

/// Builds an environment from its id and an optional parameter object whose
/// keys override the defaults. Unknown ids or keys throw ConfigError.
std::unique_ptr<Environment> make_environment(std::string_view id,
                                              const nlohmann::json& params = {});

}  // namespace ldg

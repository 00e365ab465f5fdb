#include "env.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ldg {

Mode mode_from_string(std::string_view text) {
  if (text == "autonomous") return Mode::Autonomous;
  if (text == "supervisor") return Mode::Supervisor;
  throw SchemaError("unknown mode '" + std::string(text) + "'");
}

EnvAction Environment::clip(const EnvAction& action) const {
  check_action(action);
  const auto& s = spec();
  return {action.values.cwiseMax(s.action_low).cwiseMin(s.action_high)};
}

double Environment::max_action_discrepancy() const {
  const auto& s = spec();
  return (s.action_high - s.action_low).norm();
}

void Environment::check_state(const EnvState& state) const {
  if (state.dim() != static_cast<Eigen::Index>(spec().state_dim)) {
    throw ContractViolation(std::string(id()) + ": state has dimension " +
                            std::to_string(state.dim()) + ", expected " +
                            std::to_string(spec().state_dim));
  }
  if (!state.values.allFinite()) {
    throw ContractViolation(std::string(id()) + ": state has non-finite entries");
  }
}

void Environment::check_action(const EnvAction& action) const {
  if (action.dim() != static_cast<Eigen::Index>(spec().action_dim)) {
    throw ContractViolation(std::string(id()) + ": action has dimension " +
                            std::to_string(action.dim()) + ", expected " +
                            std::to_string(spec().action_dim));
  }
}

// ---------------------------------------------------------------- LineTrack1D

LineTrack1D::LineTrack1D(Params params) : params_(params) {
  if (params_.horizon < 1) throw ConfigError("environment.params.horizon: must be >= 1");
  if (!(params_.dt > 0.0)) throw ConfigError("environment.params.dt: must be > 0");
  if (!(params_.start_low < params_.start_high)) {
    throw ConfigError("environment.params.start_low: must be < start_high");
  }
  spec_.state_dim = 1;
  spec_.action_dim = 1;
  spec_.horizon = params_.horizon;
  spec_.action_low = Vector::Constant(1, -1.0);
  spec_.action_high = Vector::Constant(1, 1.0);
  spec_.dt = params_.dt;
}

EnvState LineTrack1D::reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(params_.start_low, params_.start_high);
  return {Vector::Constant(1, dist(rng))};
}

StepOutcome LineTrack1D::step(const EnvState& state, const EnvAction& action, int t) const {
  check_state(state);
  const EnvAction a = clip(action);
  StepOutcome out;
  out.next_state.values = state.values + a.values * params_.dt;
  const double err = std::abs(out.next_state.values(0) - params_.x_ref);
  out.info.reward = -err;
  out.done = t + 1 >= params_.horizon;
  out.info.success = out.done && err <= params_.tolerance;
  return out;
}

EnvAction LineTrack1D::supervisor_action(const EnvState& state) const {
  check_state(state);
  return clip({Vector::Constant(1, params_.k_p * (params_.x_ref - state.values(0)))});
}

nlohmann::json LineTrack1D::params() const {
  return {{"x_ref", params_.x_ref},         {"k_p", params_.k_p},
          {"dt", params_.dt},               {"horizon", params_.horizon},
          {"start_low", params_.start_low}, {"start_high", params_.start_high},
          {"tolerance", params_.tolerance}};
}

nlohmann::json LineTrack1D::scene() const {
  return {{"kind", "line"}, {"x_ref", params_.x_ref}, {"extent", {-1.0, 1.0}}};
}

// ---------------------------------------------------------------- PointGoal2D

PointGoal2D::PointGoal2D(Params params) : params_(params) {
  if (params_.horizon < 1) throw ConfigError("environment.params.horizon: must be >= 1");
  if (!(params_.dt > 0.0)) throw ConfigError("environment.params.dt: must be > 0");
  if (!(params_.goal_radius > 0.0)) {
    throw ConfigError("environment.params.goal_radius: must be > 0");
  }
  if (!(params_.gap_half_width > 0.0)) {
    throw ConfigError("environment.params.gap_half_width: must be > 0");
  }
  if (!(params_.start_x_high < params_.wall_x - params_.wall_half_thickness)) {
    throw ConfigError("environment.params.start_x_high: starts must lie before the wall");
  }
  if (!(params_.goal_x_low > params_.wall_x + params_.wall_half_thickness)) {
    throw ConfigError("environment.params.goal_x_low: goals must lie past the wall");
  }
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.horizon = params_.horizon;
  spec_.action_low = Vector::Constant(2, -1.0);
  spec_.action_high = Vector::Constant(2, 1.0);
  spec_.dt = params_.dt;
}

EnvState PointGoal2D::reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  EnvState s{Vector(4)};
  s.values(0) = uniform(params_.start_x_low, params_.start_x_high);
  s.values(1) = uniform(params_.start_y_low, params_.start_y_high);
  s.values(2) = uniform(params_.goal_x_low, params_.goal_x_high);
  s.values(3) = uniform(params_.goal_y_low, params_.goal_y_high);
  return s;
}

bool PointGoal2D::in_corridor_region(double x) const {
  return x >= params_.wall_x - params_.wall_half_thickness - params_.corridor_length &&
         x <= params_.wall_x + params_.wall_half_thickness;
}

double PointGoal2D::centerline(double x) const {
  const double lo = params_.wall_x - params_.wall_half_thickness;
  const double len = 2.0 * params_.wall_half_thickness;
  const double u = std::clamp((x - lo) / len, 0.0, 1.0);
  return params_.gap_center + params_.corridor_amplitude * 0.5 *
                                  (1.0 - std::cos(std::numbers::pi * params_.corridor_half_waves * u));
}

bool PointGoal2D::hits_wall(double x, double y) const {
  return std::abs(x - params_.wall_x) <= params_.wall_half_thickness &&
         std::abs(y - centerline(x)) > params_.gap_half_width;
}

StepOutcome PointGoal2D::step(const EnvState& state, const EnvAction& action, int t) const {
  check_state(state);
  const EnvAction a = clip(action);
  const Eigen::Vector2d p0 = state.values.head<2>();
  const Eigen::Vector2d goal = state.values.tail<2>();
  const Eigen::Vector2d p1 = (p0 + a.values * params_.dt).cwiseMax(-1.0).cwiseMin(1.0);

  // Sub-sample the move; a step is at most dt * sqrt(2) long, well below the
  // channel width, so eight samples cannot skip over a wall edge.
  constexpr int kSamples = 8;
  bool collided = false;
  for (int i = 1; i <= kSamples && !collided; ++i) {
    const Eigen::Vector2d p = p0 + (p1 - p0) * (static_cast<double>(i) / kSamples);
    collided = hits_wall(p.x(), p.y());
  }

  StepOutcome out;
  out.next_state.values = state.values;
  const double before = (goal - p0).norm();
  if (collided) {
    out.info.collision = true;
    out.done = params_.terminal_collision || t + 1 >= params_.horizon;
    return out;
  }
  out.next_state.values.head<2>() = p1;
  const double after = (goal - p1).norm();
  out.info.reward = before - after;
  const bool at_goal = after <= params_.goal_radius;
  out.done = (at_goal && params_.stop_at_goal) || t + 1 >= params_.horizon;
  if (out.done && at_goal) {
    out.info.success = true;
    out.info.reward += 1.0;
  }
  return out;
}

EnvAction PointGoal2D::supervisor_action(const EnvState& state) const {
  check_state(state);
  const double x = state.values(0);
  const double y = state.values(1);
  const double gx = state.values(2);
  const double gy = state.values(3);
  Vector a(2);
  if (in_corridor_region(x)) {
    const double offset = centerline(x) - y;
    const double alignment =
        std::clamp(1.0 - std::abs(offset) / params_.gap_half_width, 0.0, 1.0);
    const double cap = params_.corridor_speed;
    a(0) = std::clamp(params_.k_p * (gx - x), -cap, cap) * alignment;
    const double ahead = centerline(x + a(0) * params_.dt) - centerline(x);
    a(1) = ahead / params_.dt + params_.corridor_gain * offset;
  } else {
    a(0) = params_.k_p * (gx - x);
    a(1) = params_.k_p * (gy - y);
  }
  return clip({a});
}

nlohmann::json PointGoal2D::params() const {
  const auto& p = params_;
  return {{"k_p", p.k_p},
          {"corridor_gain", p.corridor_gain},
          {"dt", p.dt},
          {"horizon", p.horizon},
          {"goal_radius", p.goal_radius},
          {"wall_x", p.wall_x},
          {"wall_half_thickness", p.wall_half_thickness},
          {"gap_center", p.gap_center},
          {"gap_half_width", p.gap_half_width},
          {"corridor_length", p.corridor_length},
          {"corridor_amplitude", p.corridor_amplitude},
          {"corridor_half_waves", p.corridor_half_waves},
          {"corridor_speed", p.corridor_speed},
          {"terminal_collision", p.terminal_collision},
          {"stop_at_goal", p.stop_at_goal},
          {"start_x_low", p.start_x_low},
          {"start_x_high", p.start_x_high},
          {"start_y_low", p.start_y_low},
          {"start_y_high", p.start_y_high},
          {"goal_x_low", p.goal_x_low},
          {"goal_x_high", p.goal_x_high},
          {"goal_y_low", p.goal_y_low},
          {"goal_y_high", p.goal_y_high}};
}

nlohmann::json PointGoal2D::scene() const {
  const auto& p = params_;
  return {{"kind", "plane"},
          {"extent", {-1.0, 1.0, -1.0, 1.0}},
          {"goal_radius", p.goal_radius},
          {"wall", {{"x", p.wall_x}, {"half_thickness", p.wall_half_thickness}}},
          {"gap", {{"center", p.gap_center}, {"half_width", p.gap_half_width}}},
          {"channel", {{"amplitude", p.corridor_amplitude}, {"half_waves", p.corridor_half_waves}}},
          {"corridor_start", p.wall_x - p.wall_half_thickness - p.corridor_length}};
}

namespace {

template <class Params>
void apply_overrides(const nlohmann::json& overrides, const nlohmann::json& defaults,
                     Params& params, void (*assign)(Params&, const std::string&,
                                                    const nlohmann::json&)) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw ConfigError("environment.params: must be an object");
  std::string problems;
  for (const auto& [key, value] : overrides.items()) {
    if (!defaults.contains(key)) {
      problems += "environment.params." + key + ": unknown parameter\n";
      continue;
    }
    if (!value.is_number() && !value.is_boolean()) {
      problems += "environment.params." + key + ": must be a number\n";
      continue;
    }
    assign(params, key, value);
  }
  if (!problems.empty()) {
    problems.pop_back();
    throw ConfigError(problems);
  }
}

void assign_line(LineTrack1D::Params& p, const std::string& key, const nlohmann::json& v) {
  if (key == "x_ref") p.x_ref = v.get<double>();
  else if (key == "k_p") p.k_p = v.get<double>();
  else if (key == "dt") p.dt = v.get<double>();
  else if (key == "horizon") p.horizon = v.get<int>();
  else if (key == "start_low") p.start_low = v.get<double>();
  else if (key == "start_high") p.start_high = v.get<double>();
  else if (key == "tolerance") p.tolerance = v.get<double>();
}

void assign_point(PointGoal2D::Params& p, const std::string& key, const nlohmann::json& v) {
  double* fields[] = {&p.k_p,          &p.corridor_gain,       &p.dt,
                      &p.goal_radius,  &p.wall_x,              &p.wall_half_thickness,
                      &p.gap_center,   &p.gap_half_width,      &p.corridor_length,
                      &p.start_x_low,  &p.start_x_high,        &p.start_y_low,
                      &p.start_y_high, &p.goal_x_low,          &p.goal_x_high,
                      &p.goal_y_low,   &p.goal_y_high,         &p.corridor_amplitude,
                      &p.corridor_half_waves, &p.corridor_speed};
  const char* names[] = {"k_p",          "corridor_gain", "dt",
                         "goal_radius",  "wall_x",        "wall_half_thickness",
                         "gap_center",   "gap_half_width", "corridor_length",
                         "start_x_low",  "start_x_high",  "start_y_low",
                         "start_y_high", "goal_x_low",    "goal_x_high",
                         "goal_y_low",   "goal_y_high",   "corridor_amplitude",
                         "corridor_half_waves", "corridor_speed"};
  if (key == "horizon") {
    p.horizon = v.get<int>();
    return;
  }
  if (key == "terminal_collision") {
    p.terminal_collision = v.is_boolean() ? v.get<bool>() : v.get<double>() != 0.0;
    return;
  }
  if (key == "stop_at_goal") {
    p.stop_at_goal = v.is_boolean() ? v.get<bool>() : v.get<double>() != 0.0;
    return;
  }
  for (std::size_t i = 0; i < std::size(names); ++i) {
    if (key == names[i]) *fields[i] = v.get<double>();
  }
}

}  // namespace

std::unique_ptr<Environment> make_environment(std::string_view id,
                                              const nlohmann::json& params) {
  if (id == "line_track_1d") {
    LineTrack1D::Params p;
    apply_overrides(params, LineTrack1D(p).params(), p, &assign_line);
    return std::make_unique<LineTrack1D>(p);
  }
  if (id == "point_goal_2d") {
    PointGoal2D::Params p;
    apply_overrides(params, PointGoal2D(p).params(), p, &assign_point);
    return std::make_unique<PointGoal2D>(p);
  }
  throw ConfigError("environment.id: unknown environment '" + std::string(id) +
                    "' (expected line_track_1d or point_goal_2d)");
}

}  // namespace ldg

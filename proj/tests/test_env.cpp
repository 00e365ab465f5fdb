#include "lazydagger/env.hpp"
#include "lazydagger/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace ldg;

namespace {

EnvState state2(double x, double y, double gx, double gy) {
  Vector v(4);
  v << x, y, gx, gy;
  return {v};
}

EnvAction act(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return {v};
}

// Wall pushed far to the right so that the plain proportional law applies.
PointGoal2D open_field(double k_p = 1.0) {
  PointGoal2D::Params p;
  p.k_p = k_p;
  p.wall_x = 0.95;
  p.wall_half_thickness = 0.01;
  p.corridor_length = 0.01;
  p.corridor_amplitude = 0.0;
  p.stop_at_goal = true;
  p.goal_x_low = 0.97;
  p.goal_x_high = 0.99;
  return PointGoal2D(p);
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  LineTrack1D line;
  CHECK(line.reset(7) == line.reset(7));
  CHECK_FALSE(line.reset(0) == line.reset(1));
  PointGoal2D point;
  CHECK(point.reset(7) == point.reset(7));
  CHECK_FALSE(point.reset(0) == point.reset(1));
}

TEST_CASE("PointGoal2D starts outside the goal radius") {
  PointGoal2D env;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = env.reset(seed);
    const double dist = (s.values.head<2>() - s.values.tail<2>()).norm();
    REQUIRE(dist > env.parameters().goal_radius);
    REQUIRE(s.values.allFinite());
  }
}

TEST_CASE("LineTrack1D zero action is a fixed point") {
  LineTrack1D env;
  Vector x(1);
  x << 0.5;
  const auto out = env.step({x}, act({0.0}), 0);
  CHECK(out.next_state.values(0) == doctest::Approx(0.5));
}

TEST_CASE("PointGoal2D update rule and clipping") {
  PointGoal2D env = open_field();
  const auto s = state2(0, 0, 0.8, 0.5);
  const auto out = env.step(s, act({1, 0}), 0);
  CHECK(out.next_state.values(0) == doctest::Approx(0.1));
  CHECK(out.next_state.values(1) == doctest::Approx(0.0));
  CHECK_FALSE(out.done);

  const auto clipped = env.step(s, act({2, 0}), 0);
  CHECK(clipped.next_state == out.next_state);
  for (double a : {-5.0, -1.0, 0.3, 1.0, 7.0}) {
    const auto raw = env.step(s, act({a, -a}), 3);
    const auto pre = env.step(s, env.clip(act({a, -a})), 3);
    CHECK(raw.next_state == pre.next_state);
  }
}

TEST_CASE("done at the horizon and at the goal") {
  LineTrack1D line;
  Vector x(1);
  x << 0.9;
  CHECK(line.step({x}, act({0}), line.spec().horizon - 1).done);
  CHECK_FALSE(line.step({x}, act({0}), 0).done);

  PointGoal2D env = open_field();
  const auto near = state2(0.79, 0.5, 0.8, 0.5);
  const auto out = env.step(near, act({0.1, 0}), 0);
  CHECK(out.done);
  CHECK(out.info.success);
}

TEST_CASE("supervisor proportional law") {
  PointGoal2D env = open_field(1.0);
  const auto a = env.supervisor_action(state2(0, 0, 1, 0));
  CHECK(a.values(0) == doctest::Approx(1.0));
  CHECK(a.values(1) == doctest::Approx(0.0));

  const auto at_goal = env.supervisor_action(state2(0.7, 0.2, 0.7, 0.2));
  CHECK(at_goal.values.norm() == doctest::Approx(0.0));

  const auto s = state2(-0.3, 0.4, 0.6, -0.2);
  CHECK(env.supervisor_action(s) == env.supervisor_action(s));

  LineTrack1D line(LineTrack1D::Params{.x_ref = 0.2, .k_p = 2.0});
  Vector x(1);
  x << -0.1;
  CHECK(line.supervisor_action({x}).values(0) == doctest::Approx(0.6));
  x << -2.0;
  CHECK(line.supervisor_action({x}).values(0) == doctest::Approx(1.0));
}

TEST_CASE("max action discrepancy is the box diagonal") {
  PointGoal2D env;
  CHECK(env.max_action_discrepancy() == doctest::Approx(2 * std::sqrt(2.0)));
  LineTrack1D line;
  CHECK(line.max_action_discrepancy() == doctest::Approx(2.0));
}

TEST_CASE("dimension mismatch is a contract violation") {
  PointGoal2D env;
  CHECK_THROWS_AS(env.step(state2(0, 0, 1, 1), act({1}), 0), ContractViolation);
  Vector bad(3);
  bad.setZero();
  CHECK_THROWS_AS(env.supervisor_action({bad}), ContractViolation);
}

TEST_CASE("the default supervisor reaches the goal from every start") {
  for (const char* id : {"point_goal_2d", "line_track_1d"}) {
    auto env = make_environment(id);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto s = env->reset(seed);
      bool success = false;
      bool collision = false;
      for (int t = 0; t < env->spec().horizon; ++t) {
        const auto out = env->step(s, env->supervisor_action(s), t);
        s = out.next_state;
        collision = collision || out.info.collision;
        if (out.done) {
          success = out.info.success;
          break;
        }
      }
      INFO(id << " seed " << seed);
      CHECK(success);
      CHECK_FALSE(collision);
    }
  }
}

TEST_CASE("the wall blocks straight-line motion") {
  PointGoal2D env;
  const auto& p = env.parameters();
  const double y_blocked = p.gap_center + p.gap_half_width + 0.2;
  CHECK(env.hits_wall(p.wall_x, y_blocked));
  CHECK_FALSE(env.hits_wall(p.wall_x, env.centerline(p.wall_x)));
  const auto s = state2(p.wall_x - p.wall_half_thickness - 0.02, y_blocked, 0.8, y_blocked);
  const auto out = env.step(s, act({1, 0}), 0);
  CHECK(out.info.collision);
  CHECK(out.next_state.values(0) < p.wall_x - p.wall_half_thickness);
}

TEST_CASE("make_environment rejects unknown ids and keys") {
  CHECK_THROWS_AS(make_environment("cartpole"), ConfigError);
  CHECK_THROWS_AS(make_environment("point_goal_2d", {{"k_q", 1}}), ConfigError);
  CHECK_THROWS_AS(make_environment("line_track_1d", {{"horizon", 0}}), ConfigError);
  auto env = make_environment("point_goal_2d", {{"horizon", 40}});
  CHECK(env->spec().horizon == 40);
  CHECK(env->params().at("horizon") == 40);
  CHECK(env->scene().is_object());
}

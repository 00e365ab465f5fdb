#include "lazydagger/lazydagger.h"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  ldg_string_free(s);
  return out;
}

const char* kTiny = R"({
  "algorithms": ["lazydagger", "safedagger"],
  "offline_pairs": 200, "bc_pretrain_epochs": 1, "epochs": 1, "steps_per_epoch": 60,
  "seeds": [0], "test_rollouts": 1,
  "policy": {"hidden": [8], "gradient_steps_per_epoch": 10},
  "classifier": {"hidden": [8], "gradient_steps_per_epoch": 10}
})";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(ldg_status_name(LDG_OK)) == "ok");
  CHECK(std::string(ldg_version()) == "1.0.0");
  CHECK(ldg_last_error() != nullptr);
}

TEST_CASE("environment handles") {
  ldg_env* env = nullptr;
  REQUIRE(ldg_env_create("point_goal_2d", nullptr, &env) == LDG_OK);
  size_t sd = 0, ad = 0;
  int horizon = 0;
  REQUIRE(ldg_env_dims(env, &sd, &ad, &horizon) == LDG_OK);
  CHECK(sd == 4);
  CHECK(ad == 2);
  CHECK(horizon > 0);

  std::vector<double> s(sd), s2(sd), a(ad);
  REQUIRE(ldg_env_reset(env, 7, s.data(), s.size()) == LDG_OK);
  std::vector<double> again(sd);
  ldg_env_reset(env, 7, again.data(), again.size());
  CHECK(s == again);
  REQUIRE(ldg_env_supervisor_action(env, s.data(), sd, a.data(), ad) == LDG_OK);
  int done = -1, success = -1, collision = -1;
  double reward = 0;
  REQUIRE(ldg_env_step(env, s.data(), sd, a.data(), ad, 0, s2.data(), &done, &success, &collision,
                       &reward) == LDG_OK);
  CHECK(done == 0);
  CHECK(s2 != s);

  CHECK(ldg_env_reset(env, 7, s.data(), 3) == LDG_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ldg_last_error()).size() > 0);
  CHECK(ldg_env_dims(nullptr, &sd, &ad, &horizon) == LDG_ERR_INVALID_ARGUMENT);
  ldg_env_destroy(env);
  ldg_env_destroy(nullptr);

  ldg_env* bad = nullptr;
  CHECK(ldg_env_create("warp_drive", nullptr, &bad) == LDG_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(ldg_env_create("line_track_1d", R"({"k_q": 1})", &bad) == LDG_ERR_CONFIG);
  CHECK(ldg_env_create("line_track_1d", "{oops", &bad) == LDG_ERR_CONFIG);
}

TEST_CASE("metrics") {
  double b = 0;
  REQUIRE(ldg_burden(4, 20, 2.5, &b) == LDG_OK);
  CHECK(b == doctest::Approx(30));
  CHECK(ldg_burden(-1, 20, 1, &b) == LDG_ERR_INVALID_ARGUMENT);

  double cut = -1;
  int defined = 0;
  REQUIRE(ldg_cutoff_latency(21, 43, 53, 34, &cut, &defined, nullptr) == LDG_OK);
  CHECK(defined == 1);
  CHECK(cut == doctest::Approx(0.28125));
  char* reason = nullptr;
  cut = -1;
  REQUIRE(ldg_cutoff_latency(20, 40, 20, 30, &cut, &defined, &reason) == LDG_OK);
  CHECK(defined == 0);
  CHECK(cut == -1);
  CHECK_FALSE(take(reason).empty());

  const int modes[] = {0, 1, 1, 0, 1};
  size_t c = 0;
  REQUIRE(ldg_count_switches(modes, 5, &c) == LDG_OK);
  CHECK(c == 4);
  const int bad[] = {0, 2};
  CHECK(ldg_count_switches(bad, 2, &c) == LDG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config validation") {
  char* resolved = nullptr;
  REQUIRE(ldg_validate_config("{}", &resolved) == LDG_OK);
  const auto j = json::parse(take(resolved));
  CHECK(j.at("tau_sup") == "calibrate:0.2");

  resolved = nullptr;
  CHECK(ldg_validate_config(R"({"tau_sup": 0.1, "tau_auto": 0.3, "epochz": 1})", &resolved) ==
        LDG_ERR_CONFIG);
  CHECK(resolved == nullptr);
  const std::string msg = ldg_last_error();
  CHECK(msg.find("tau_auto") != std::string::npos);
  CHECK(msg.find("epochz") != std::string::npos);
  CHECK(ldg_validate_config(nullptr, &resolved) == LDG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("run, compare, calibrate and policies") {
  testing::TempDir dir("capi");
  const std::string out = (dir / "run").string();
  char* manifest = nullptr;
  REQUIRE(ldg_run(kTiny, out.c_str(), 0, &manifest) == LDG_OK);
  const auto m = json::parse(take(manifest));
  CHECK(m.at("runs").size() == 2);

  // Resume of a finished run is a no-op with the same results.
  manifest = nullptr;
  REQUIRE(ldg_run(kTiny, out.c_str(), 1, &manifest) == LDG_OK);
  const auto m2 = json::parse(take(manifest));
  CHECK(m2.at("runs") == m.at("runs"));

  const double grid[] = {0.0, 1.0, 5.0};
  char* cmp = nullptr;
  const std::string lazy = out + "/lazydagger";
  const std::string safe = out + "/safedagger";
  REQUIRE(ldg_compare(lazy.c_str(), safe.c_str(), grid, 3, &cmp) == LDG_OK);
  const auto c = json::parse(take(cmp));
  CHECK(c.at("burden").size() == 3);
  CHECK(ldg_compare((out + "/nothing").c_str(), safe.c_str(), grid, 3, &cmp) == LDG_ERR_IO);

  char* cal = nullptr;
  REQUIRE(ldg_calibrate(kTiny, 0, 0.2, &cal) == LDG_OK);
  CHECK(json::parse(take(cal)).at("tau_sup").get<double>() > 0.0);
  CHECK(ldg_calibrate(kTiny, 0, 1.2, &cal) == LDG_ERR_CONFIG);

  ldg_policy* p = nullptr;
  const std::string policy_path = lazy + "/seed_0/policy.json";
  REQUIRE(ldg_policy_load(policy_path.c_str(), &p) == LDG_OK);
  size_t sd = 0, ad = 0;
  REQUIRE(ldg_policy_dims(p, &sd, &ad) == LDG_OK);
  std::vector<double> s(sd, 0.1), a(ad);
  REQUIRE(ldg_policy_forward(p, s.data(), sd, a.data(), ad) == LDG_OK);
  for (double x : a) CHECK(std::abs(x) <= 1.0);
  char* hash = nullptr;
  REQUIRE(ldg_policy_hash(p, &hash) == LDG_OK);
  CHECK(take(hash) == m.at("runs")[0].at("final_policy_hash"));
  const std::string copy = (dir / "copy.json").string();
  REQUIRE(ldg_policy_save(p, copy.c_str()) == LDG_OK);
  ldg_policy_destroy(p);

  ldg_policy* missing = nullptr;
  CHECK(ldg_policy_load((out + "/nope.json").c_str(), &missing) == LDG_ERR_IO);
  testing::write_text(dir / "junk.json", "{\"format\": \"something else\"}");
  CHECK(ldg_policy_load((dir / "junk.json").c_str(), &missing) == LDG_ERR_SCHEMA);
}

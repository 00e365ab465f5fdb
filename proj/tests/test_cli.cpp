#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <string>

using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(LDG_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const char* kTiny = R"({
  "algorithms": ["lazydagger", "safedagger"],
  "offline_pairs": 200, "bc_pretrain_epochs": 1, "epochs": 1, "steps_per_epoch": 60,
  "seeds": [0, 1], "test_rollouts": 1,
  "policy": {"hidden": [8], "gradient_steps_per_epoch": 10},
  "classifier": {"hidden": [8], "gradient_steps_per_epoch": 10}
})";

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli("").code == 64);
  CHECK(cli("frobnicate").code == 64);
  CHECK(cli("run").code == 64);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("validate") {
  testing::TempDir dir("cli-validate");
  testing::write_text(dir / "ok.json", R"({"epochs": 3})");
  testing::write_text(dir / "bad.json", R"({"tau_sup": 0.1, "tau_auto": 0.5})");
  testing::write_text(dir / "broken.json", "{");

  const auto ok = cli("validate --config " + (dir / "ok.json").string());
  CHECK(ok.code == 0);
  const auto j = json::parse(ok.out);
  CHECK(j.at("epochs") == 3);
  CHECK(j.at("tau_sup") == "calibrate:0.2");

  CHECK(cli("validate --config " + (dir / "bad.json").string()).code == 2);
  CHECK(cli("validate --config " + (dir / "broken.json").string()).code == 2);
  CHECK(cli("validate --config " + (dir / "missing.json").string()).code == 4);

  CHECK(cli("validate --config " + (dir / "ok.json").string() + " --out " +
            (dir / "resolved.json").string())
            .code == 0);
  CHECK(json::parse(testing::slurp(dir / "resolved.json")).at("epochs") == 3);
}

TEST_CASE("run, compare and calibrate") {
  testing::TempDir dir("cli-run");
  testing::write_text(dir / "cfg.json", kTiny);
  const std::string cfg = (dir / "cfg.json").string();
  const std::string out = (dir / "out").string();

  const auto run = cli("run --config " + cfg + " --seed 1 --out " + out + " --latency-grid 0,2,4");
  REQUIRE(run.code == 0);
  const auto m = json::parse(run.out);
  CHECK(m.at("seeds") == json({1}));
  CHECK(m.at("resolved_config").at("latency_grid") == json({0.0, 2.0, 4.0}));
  CHECK(std::filesystem::exists(dir / "out" / "lazydagger" / "seed_1" / "epochs.csv"));

  CHECK(cli("run --config " + cfg + " --seed 1 --out " + out + " --latency-grid 0,2,4 --resume").code == 0);
  // Same directory, different configuration.
  CHECK(cli("run --config " + cfg + " --seed 0 --out " + out + " --resume").code == 2);
  CHECK(cli("run --config " + cfg + " --latency-grid 1,x").code == 64);

  const auto cmp = cli("compare " + out + "/lazydagger " + out + "/safedagger --latency-grid 0,1");
  REQUIRE(cmp.code == 0);
  CHECK(json::parse(cmp.out).at("burden").size() == 2);
  CHECK(cli("compare " + out + "/nope " + out + "/safedagger").code == 4);
  std::filesystem::create_directories(dir / "empty");
  CHECK(cli("compare " + (dir / "empty").string() + " " + out + "/safedagger").code == 3);

  const auto cal = cli("calibrate --config " + cfg + " --target 0.25");
  REQUIRE(cal.code == 0);
  const auto c = json::parse(cal.out);
  CHECK(c.at("target") == 0.25);
  CHECK(c.at("seed") == 0);
  CHECK(cli("calibrate --config " + cfg + " --target 1.5").code == 64);
}

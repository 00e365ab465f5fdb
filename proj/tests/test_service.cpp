#include "console.hpp"
#include "lazydagger/errors.hpp"
#include "lazydagger/meta.hpp"
#include "lazydagger/metrics.hpp"
#include "lazydagger/service.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <future>

using namespace ldg;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

ServiceConfig config(const std::string& session) {
  ServiceConfig c;
  c.session = session;
  c.timeout = std::chrono::duration<double>(3.0);
  return c;
}

std::unique_ptr<InterventionService> start(const ServiceConfig& c) {
  return InterventionService::start(c, vec2(-1, -1), vec2(1, 1));
}

InterventionRequest request(int t) {
  InterventionRequest r;
  r.epoch = 0;
  r.episode = 3;
  r.t = t;
  r.state.values = Vector::Zero(4);
  r.scene = json::object();
  r.robot_action.values = vec2(0.1, 0.2);
  r.thresholds = {0.2, 0.1};
  return r;
}

// Connects and completes the handshake; returns the resync message.
json attach(testing::Client& c, const InterventionService& s, const std::string& token = "") {
  REQUIRE(c.connect(s.port()));
  c.hello(s.session(), token);
  auto sync = c.recv();
  REQUIRE(sync);
  REQUIRE(sync->at("type") == "resync");
  return *sync;
}

LearnerState small_learner(const Environment& env, std::uint64_t seed) {
  const auto& spec = env.spec();
  auto data = collect_supervisor_data(env, 300, seed);
  auto [d, ds] = split_dataset(data, 0.7, seed);
  auto policy = init_policy({spec.state_dim, 16, spec.action_dim}, spec.action_low, spec.action_high, seed);
  TrainConfig tc;
  tc.gradient_steps_per_epoch = 50;
  policy = train_bc(policy, d, tc, seed).policy;
  auto classifier = init_classifier({spec.state_dim, 8, 1}, seed);
  return {policy, classifier, d, ds};
}

LazyConfig small_run(const ThresholdPair& th) {
  LazyConfig lc;
  lc.epochs = 2;
  lc.steps_per_epoch = 100;
  lc.thresholds = th;
  lc.sigma2 = 0.05;
  return lc;
}

TrainConfigs small_training() {
  TrainConfigs t;
  t.policy.gradient_steps_per_epoch = 20;
  t.classifier.gradient_steps_per_epoch = 20;
  return t;
}

}  // namespace

TEST_CASE("frames") {
  const json a = {{"type", "hello"}, {"x", 1.5}};
  const json b = {{"type", "human_action"}, {"action", {0.25, -1}}};
  std::string buf = encode_frame(a) + encode_frame(b);
  const auto whole = buf;
  CHECK(whole.size() == 8 + a.dump().size() + b.dump().size());

  std::string partial = whole.substr(0, whole.size() - 3);
  auto frames = decode_frames(partial);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == a);
  partial += whole.substr(whole.size() - 3);
  frames = decode_frames(partial);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0] == b);
  CHECK(partial.empty());

  std::string huge("\xff\xff\xff\xff", 4);
  CHECK_THROWS_AS(decode_frames(huge), SchemaError);
  std::string junk = std::string("\0\0\0\3", 4) + "{{{";
  CHECK_THROWS_AS(decode_frames(junk), SchemaError);
}

TEST_CASE("start and stop without a console") {
  auto s = start(config("idle"));
  CHECK(s->port() > 0);
  CHECK(s->health_port() > 0);
  CHECK(s->phase() == SessionPhase::Idle);
  CHECK_FALSE(s->console_connected());
  CHECK(s->health().at("console_connected") == false);
  CHECK_FALSE(s->wait_for_console(50ms));
  s->stop();
  s->stop();
  CHECK_THROWS_AS(s->request_intervention(request(0)), SupervisorUnavailable);
}

TEST_CASE("duplicate sessions are refused while the first is alive") {
  auto a = start(config("dup"));
  CHECK_THROWS_AS(start(config("dup")), ConfigError);
  a.reset();
  CHECK_NOTHROW(start(config("dup")));
}

TEST_CASE("handshake") {
  auto c = config("hs");
  c.token = "secret";
  auto s = start(c);

  SUBCASE("good hello gets a resync with the action bounds") {
    testing::Client cl;
    const auto sync = attach(cl, *s, "secret");
    CHECK(sync.at("phase") == "idle");
    CHECK(sync.at("mode") == "autonomous");
    CHECK(sync.at("pending").is_null());
    CHECK(sync.at("action_low") == json({-1.0, -1.0}));
    CHECK(s->wait_for_console(1s));

    testing::Client second;
    REQUIRE(second.connect(s->port()));
    second.hello("hs", "secret");
    auto err = second.recv();
    REQUIRE(err);
    CHECK(err->at("code") == "session_busy");
    CHECK(second.closed_by_peer());
    CHECK(s->console_connected());
  }

  SUBCASE("rejections") {
    const std::vector<std::pair<json, std::string>> cases{
        {{{"type", "hello"}, {"protocol", 1}, {"session", "hs"}, {"token", "wrong"}}, "unauthorized"},
        {{{"type", "hello"}, {"protocol", 2}, {"session", "hs"}, {"token", "secret"}}, "protocol_mismatch"},
        {{{"type", "hello"}, {"protocol", 1}, {"session", "other"}, {"token", "secret"}}, "unknown_session"},
        {{{"type", "human_action"}, {"t", 0}}, "bad_hello"},
    };
    for (const auto& [msg, code] : cases) {
      INFO(code);
      testing::Client cl;
      REQUIRE(cl.connect(s->port()));
      cl.send(msg);
      auto err = cl.recv();
      REQUIRE(err);
      CHECK(err->at("type") == "error");
      CHECK(err->at("code") == code);
      CHECK(cl.closed_by_peer());
    }
    CHECK_FALSE(s->console_connected());
  }
}

TEST_CASE("intervention round trip with stale and malformed answers") {
  auto s = start(config("rt"));
  testing::Client cl;
  attach(cl, *s);

  auto answer = std::async(std::launch::async, [&] { return s->request_intervention(request(7)); });
  auto req = cl.recv_type("request_intervention");
  REQUIRE(req);
  CHECK(req->at("t") == 7);
  CHECK(req->at("episode") == 3);
  CHECK(req->at("robot_action") == json({0.1, 0.2}));
  CHECK(req->at("thresholds").at("tau_sup") == 0.2);
  CHECK(s->phase() == SessionPhase::AwaitingHuman);

  cl.send({{"type", "human_action"}, {"t", 6}, {"action", {0.0, 0.0}}});
  auto err = cl.recv();
  REQUIRE(err);
  CHECK(err->at("code") == "stale_t");
  auto again = cl.recv();
  REQUIRE(again);
  CHECK(again->at("request_id") == req->at("request_id"));

  cl.send({{"type", "human_action"}, {"t", 7}, {"action", json::array({0.0})}});
  err = cl.recv();
  REQUIRE(err);
  CHECK(err->at("code") == "bad_action");
  CHECK(cl.recv_type("request_intervention"));

  cl.send({{"type", "human_action"}, {"t", 7}, {"action", {2.5, -0.5}}});
  REQUIRE(answer.wait_for(3s) == std::future_status::ready);
  const auto a = answer.get();
  CHECK(a.values(0) == 1.0);  // clipped to the bound
  CHECK(a.values(1) == -0.5);

  cl.send({{"type", "human_action"}, {"t", 7}, {"action", {0.0, 0.0}}});
  err = cl.recv();
  REQUIRE(err);
  CHECK(err->at("code") == "no_request");
  cl.send({{"type", "chat"}});
  err = cl.recv();
  REQUIRE(err);
  CHECK(err->at("code") == "unsupported");
}

TEST_CASE("timeouts surface as SupervisorUnavailable") {
  auto c = config("to");
  c.timeout = std::chrono::duration<double>(0.2);
  auto s = start(c);
  try {
    s->request_intervention(request(0));
    FAIL("expected SupervisorUnavailable");
  } catch (const SupervisorUnavailable& e) {
    CHECK(e.reason() == SupervisorUnavailable::Reason::Disconnected);
  }
  testing::Client cl;
  attach(cl, *s);
  try {
    s->request_intervention(request(1));
    FAIL("expected SupervisorUnavailable");
  } catch (const SupervisorUnavailable& e) {
    CHECK(e.reason() == SupervisorUnavailable::Reason::Timeout);
  }
  CHECK(s->phase() == SessionPhase::Idle);
}

TEST_CASE("a reconnecting console receives the pending request") {
  auto s = start(config("reconnect"));
  auto answer = std::async(std::launch::async, [&] { return s->request_intervention(request(4)); });
  {
    testing::Client first;
    attach(first, *s);
    REQUIRE(first.recv_type("request_intervention"));
  }
  testing::Client second;
  const auto sync = attach(second, *s);
  REQUIRE_FALSE(sync.at("pending").is_null());
  CHECK(sync.at("pending").at("t") == 4);
  CHECK(sync.at("phase") == "awaiting_human");
  second.send({{"type", "human_action"}, {"t", 4}, {"action", {0.5, 0.5}}});
  REQUIRE(answer.wait_for(3s) == std::future_status::ready);
  CHECK(answer.get().values(0) == 0.5);
}

TEST_CASE("health endpoint") {
  auto s = start(config("health"));
  httplib::Client http("127.0.0.1", s->health_port());
  auto res = http.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto j = json::parse(res->body);
  CHECK(j.at("session") == "health");
  CHECK(j.at("phase") == "idle");
  CHECK(j.at("console_connected") == false);
  CHECK(j.at("protocol") == kProtocolVersion);

  auto c = config("nohealth");
  c.health_port = -1;
  auto quiet = start(c);
  CHECK(quiet->health_port() == -1);
}

TEST_CASE("mode updates and decimated step summaries") {
  auto c = config("stream");
  c.decimation = 10;
  auto s = start(c);
  testing::Client cl;
  attach(cl, *s);
  for (int t = 0; t < 25; ++t) s->broadcast_step({{"t", t}});
  s->broadcast_mode(Mode::Supervisor, {{"t", 25}});
  s->broadcast_mode(Mode::Autonomous, {{"t", 30}});

  std::vector<int> steps;
  int modes = 0;
  while (auto m = cl.recv(300ms)) {
    if (m->at("type") == "step_summary") steps.push_back(m->at("t").get<int>());
    if (m->at("type") == "mode_update") ++modes;
  }
  CHECK(steps == std::vector<int>{0, 10, 20});
  CHECK(modes == 2);
}

TEST_CASE("remote supervision reproduces the analytic trace") {
  PointGoal2D env;
  const ThresholdPair th{0.3, 0.15};
  const auto train = small_training();

  AnalyticSupervisor analytic(env);
  const auto reference = run_lazydagger(env, small_learner(env, 1), analytic, small_run(th), train, 1);

  auto s = InterventionService::start(config("equiv"));
  RemoteSupervisor remote(*s, env, th);
  testing::ScriptedConsole console(env, s->port(), "equiv");
  const auto remote_run = run_lazydagger(env, small_learner(env, 1), remote, small_run(th), train, 1);

  REQUIRE(remote_run.logs.size() == reference.logs.size());
  for (std::size_t i = 0; i < reference.logs.size(); ++i) {
    REQUIRE(remote_run.logs[i].same_trace(reference.logs[i]));
  }
  CHECK(console.answered() == static_cast<int>(summarize(reference.logs).supervisor_actions));
  CHECK(console.answered() > 0);
}

// Forwards to the remote supervisor and counts the mode changes the
// console should see.
class FlipCounter final : public SupervisorHandle {
 public:
  explicit FlipCounter(RemoteSupervisor& inner) : inner_(inner) {}
  Kind kind() const override { return inner_.kind(); }
  EnvAction query(const SupervisorQuery& q) override { return inner_.query(q); }
  void on_episode_start(int epoch, int episode, const EnvState& state) override {
    if (shown_ != Mode::Autonomous) ++flips;
    shown_ = Mode::Autonomous;
    inner_.on_episode_start(epoch, episode, state);
  }
  void on_step(const StepRecord& r, Mode next, const RunningCounts& c) override {
    if (next != shown_) ++flips;
    shown_ = next;
    inner_.on_step(r, next, c);
  }
  int flips = 0;

 private:
  RemoteSupervisor& inner_;
  Mode shown_ = Mode::Autonomous;
};

TEST_CASE("mode_update is sent exactly once per flip") {
  PointGoal2D env;
  const ThresholdPair th{0.3, 0.15};
  auto s = InterventionService::start(config("flips"));
  RemoteSupervisor remote(*s, env, th);
  FlipCounter counter(remote);

  testing::Client cl;
  attach(cl, *s);
  std::atomic<bool> done{false};
  std::vector<std::string> updates;
  std::thread answer([&] {
    while (!done) {
      auto m = cl.recv(50ms);
      if (!m) continue;
      if (m->at("type") == "mode_update") updates.push_back(m->at("mode").get<std::string>());
      if (m->at("type") == "request_intervention") {
        EnvState st;
        const auto v = m->at("state").get<std::vector<double>>();
        st.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        const auto a = env.supervisor_action(st);
        cl.send({{"type", "human_action"},
                 {"t", m->at("t")},
                 {"action", std::vector<double>(a.values.data(), a.values.data() + a.values.size())}});
      }
    }
  });
  const auto run = run_lazydagger(env, small_learner(env, 2), counter, small_run(th), small_training(), 2);
  std::this_thread::sleep_for(300ms);
  done = true;
  answer.join();

  CHECK(summarize(run.logs).switches > 0);
  CHECK(counter.flips > 0);
  CHECK(updates.size() == static_cast<std::size_t>(counter.flips));
  for (std::size_t i = 0; i < updates.size(); ++i) {
    INFO("update " << i);
    CHECK(updates[i] == (i % 2 == 0 ? "supervisor" : "autonomous"));
  }
}

TEST_CASE("an echo console produces zero discrepancy") {
  PointGoal2D env;
  const ThresholdPair th{0.3, 0.15};
  auto s = InterventionService::start(config("echo"));
  RemoteSupervisor remote(*s, env, th);
  testing::Client cl;
  attach(cl, *s);
  std::atomic<bool> done{false};
  std::thread echo([&] {
    while (!done) {
      auto m = cl.recv(50ms);
      if (m && m->at("type") == "request_intervention") {
        cl.send({{"type", "human_action"}, {"t", m->at("t")}, {"action", m->at("robot_action")}});
      }
    }
  });
  auto cfg = small_run(th);
  cfg.epochs = 1;
  cfg.sigma2 = 0.0;
  cfg.inject_noise = false;
  const auto run = run_lazydagger(env, small_learner(env, 3), remote, cfg, small_training(), 3);
  done = true;
  echo.join();
  std::size_t supervised = 0;
  for (const auto& log : run.logs) {
    for (const auto& r : log.records) {
      if (r.mode != Mode::Supervisor) continue;
      ++supervised;
      REQUIRE(r.discrepancy);
      CHECK(*r.discrepancy == 0.0);
    }
  }
  CHECK(supervised > 0);
}

#pragma once

#include "lazydagger/env.hpp"
#include "support.hpp"

#include <atomic>
#include <functional>
#include <thread>

namespace testing {

// Background console that answers every intervention request with the
// analytic supervisor action. `drop` may decide to hang up instead.
class ScriptedConsole {
 public:
  using DropRule = std::function<bool(const nlohmann::json& request)>;

  ScriptedConsole(const ldg::Environment& env, int port, std::string session,
                  DropRule drop = nullptr, std::string token = "")
      : env_(env), port_(port), session_(std::move(session)), token_(std::move(token)),
        drop_(std::move(drop)) {
    thread_ = std::thread([this] { loop(); });
  }
  ~ScriptedConsole() {
    stop_ = true;
    thread_.join();
  }
  ScriptedConsole(const ScriptedConsole&) = delete;
  ScriptedConsole& operator=(const ScriptedConsole&) = delete;

  int answered() const { return answered_; }
  bool dropped() const { return dropped_; }

 private:
  void loop() {
    Client c;
    if (!c.connect(port_, std::chrono::milliseconds(60000))) return;
    c.hello(session_, token_);
    while (!stop_) {
      auto m = c.recv(std::chrono::milliseconds(50));
      if (!m) continue;
      const std::string type = m->value("type", "");
      nlohmann::json request;
      if (type == "request_intervention") {
        request = *m;
      } else if (type == "resync" && m->contains("pending") && !m->at("pending").is_null()) {
        request = m->at("pending");
      } else {
        continue;
      }
      if (drop_ && drop_(request)) {
        dropped_ = true;
        c.close();
        return;
      }
      ldg::EnvState s;
      const auto values = request.at("state").get<std::vector<double>>();
      s.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
      const auto a = env_.supervisor_action(s);
      std::vector<double> out(a.values.data(), a.values.data() + a.values.size());
      ++answered_;  // before sending, so the count is final once the run ends
      c.send({{"type", "human_action"}, {"t", request.at("t")}, {"action", out}});
    }
  }

  const ldg::Environment& env_;
  int port_;
  std::string session_;
  std::string token_;
  DropRule drop_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> dropped_{false};
  std::atomic<int> answered_{0};
  std::thread thread_;
};

}  // namespace testing

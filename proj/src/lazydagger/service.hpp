#pragma once

#include "env.hpp"
#include "meta.hpp"
#include "safety.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ldg {

inline constexpr int kProtocolVersion = 1;
/// Frames larger than this are rejected and the connection dropped.
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

/// 4-byte big-endian length prefix followed by the UTF-8 JSON text.
std::string encode_frame(const nlohmann::json& message);
/// Consumes complete frames from the front of `buffer`.
std::vector<nlohmann::json> decode_frames(std::string& buffer);

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 0;         // 0 picks a free port
  int health_port = 0;  // 0 picks a free port, -1 disables the endpoint
  std::string session = "default";
  std::string token;    // empty accepts any token
  std::chrono::duration<double> timeout{120.0};
  int decimation = 10;  // every n-th autonomous step is summarized
};

enum class SessionPhase { Idle, AwaitingHuman, AutonomousStreaming };
std::string_view to_string(SessionPhase phase);

struct InterventionRequest {
  int epoch = 0;
  int episode = 0;
  int t = 0;
  EnvState state;
  nlohmann::json scene;
  EnvAction robot_action;
  ThresholdPair thresholds;
};

/// Bridges a rollout to one remote console over TCP. One service hosts one
/// session; session ids are unique within the process.
class InterventionService {
 public:
  /// Throws IoError on bind failure and ConfigError on a duplicate session.
  static std::unique_ptr<InterventionService> start(const ServiceConfig& config,
                                                    const Vector& action_low,
                                                    const Vector& action_high);
  static std::unique_ptr<InterventionService> start(const ServiceConfig& config);

  ~InterventionService();
  InterventionService(const InterventionService&) = delete;
  InterventionService& operator=(const InterventionService&) = delete;

  void stop();

  int port() const;
  int health_port() const;
  const std::string& session() const;
  SessionPhase phase() const;
  bool console_connected() const;
  nlohmann::json health() const;

  /// Blocks until a console connects or the timeout passes.
  bool wait_for_console(std::chrono::duration<double> timeout) const;

  /// Sends the request and blocks until the console answers with a matching
  /// t. Returns the action clipped to the action bounds. Throws
  /// SupervisorUnavailable on timeout, disconnect or stop.
  EnvAction request_intervention(const InterventionRequest& request);

  void set_action_bounds(const Vector& low, const Vector& high);

  /// Exactly one mode_update per call; dropped when no console is attached.
  void broadcast_mode(Mode mode, const nlohmann::json& summary);
  /// Autonomous-step summary; only every decimation-th call is sent.
  void broadcast_step(const nlohmann::json& summary);
  /// Remembered for resync; sent as part of the resync payload.
  void set_episode_context(const nlohmann::json& context);

  struct Impl;

 private:
  explicit InterventionService(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// SupervisorHandle backed by a human at a remote console.
class RemoteSupervisor final : public SupervisorHandle {
 public:
  RemoteSupervisor(InterventionService& service, const Environment& env, ThresholdPair thresholds);

  Kind kind() const override { return Kind::RemoteHuman; }
  EnvAction query(const SupervisorQuery& query) override;
  void on_episode_start(int epoch, int episode, const EnvState& state) override;
  void on_step(const StepRecord& record, Mode next_mode, const RunningCounts& counts) override;

 private:
  InterventionService& service_;
  const Environment& env_;
  ThresholdPair thresholds_;
  Mode shown_mode_ = Mode::Autonomous;
  int epoch_ = 0;
  int episode_ = 0;
};

}  // namespace ldg

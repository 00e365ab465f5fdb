#include "service.hpp"

#include "errors.hpp"

#include <httplib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>

namespace ldg {

using nlohmann::json;

std::string encode_frame(const json& message) {
  const std::string body = message.dump();
  if (body.size() > kMaxFrameBytes) throw ContractViolation("frame exceeds the size limit");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out += body;
  return out;
}

std::vector<json> decode_frames(std::string& buffer) {
  std::vector<json> out;
  std::size_t at = 0;
  while (buffer.size() - at >= 4) {
    const auto* p = reinterpret_cast<const unsigned char*>(buffer.data() + at);
    const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    if (n > kMaxFrameBytes) throw SchemaError("frame of " + std::to_string(n) + " bytes exceeds the limit");
    if (buffer.size() - at - 4 < n) break;
    try {
      out.push_back(json::parse(buffer.begin() + static_cast<std::ptrdiff_t>(at + 4),
                                buffer.begin() + static_cast<std::ptrdiff_t>(at + 4 + n)));
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("frame is not valid JSON: ") + e.what());
    }
    at += 4 + n;
  }
  buffer.erase(0, at);
  return out;
}

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::Idle: return "idle";
    case SessionPhase::AwaitingHuman: return "awaiting_human";
    case SessionPhase::AutonomousStreaming: return "autonomous_streaming";
  }
  return "idle";
}

namespace {

std::mutex g_sessions_mu;
std::set<std::string> g_sessions;

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

json error_message(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"protocol", kProtocolVersion}, {"code", code}, {"message", message}};
}

}  // namespace

struct InterventionService::Impl {
  ServiceConfig config;
  Vector low;
  Vector high;
  int listen_fd = -1;
  int port = 0;
  int health_port = -1;
  std::atomic<bool> stopping{false};
  std::thread accept_thread;
  std::thread reader_thread;
  std::thread health_thread;
  std::unique_ptr<httplib::Server> health_server;

  mutable std::mutex mu;
  mutable std::condition_variable cv;
  std::mutex write_mu;
  int console_fd = -1;
  std::uint64_t connection_id = 0;
  SessionPhase phase = SessionPhase::Idle;
  Mode mode = Mode::Autonomous;
  json counts = {{"C", 0}, {"D", 0}};
  json episode_context = nullptr;
  std::optional<json> pending;  // outstanding request message
  int pending_t = 0;
  std::optional<EnvAction> answer;
  std::uint64_t next_request_id = 1;
  std::uint64_t autonomous_steps = 0;

  ~Impl() { shutdown(); }

  void shutdown() {
    if (stopping.exchange(true)) return;
    {
      std::lock_guard lk(mu);
      cv.notify_all();
    }
    if (listen_fd >= 0) ::shutdown(listen_fd, SHUT_RDWR);
    if (accept_thread.joinable()) accept_thread.join();
    if (listen_fd >= 0) ::close(listen_fd);
    listen_fd = -1;
    int fd = -1;
    {
      std::lock_guard lk(mu);
      fd = console_fd;
    }
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    if (reader_thread.joinable()) reader_thread.join();
    {
      std::lock_guard lk(mu);
      if (console_fd >= 0) ::close(console_fd);
      console_fd = -1;
      phase = SessionPhase::Idle;
    }
    if (health_server) health_server->stop();
    if (health_thread.joinable()) health_thread.join();
    std::lock_guard lk(g_sessions_mu);
    g_sessions.erase(config.session);
  }

  // Sends to the attached console; a failed write drops the connection.
  void send(const json& message) {
    int fd = -1;
    {
      std::lock_guard lk(mu);
      fd = console_fd;
    }
    if (fd < 0) return;
    std::lock_guard wl(write_mu);
    if (!send_all(fd, encode_frame(message))) ::shutdown(fd, SHUT_RDWR);
  }

  json resync_message() const {
    return {{"type", "resync"},
            {"protocol", kProtocolVersion},
            {"session", config.session},
            {"phase", to_string(phase)},
            {"mode", to_string(mode)},
            {"counts", counts},
            {"episode", episode_context},
            {"action_low", vec_json(low)},
            {"action_high", vec_json(high)},
            {"pending", pending ? *pending : json(nullptr)}};
  }

  // Reads one frame with a deadline; used for the hello handshake.
  static std::optional<json> read_one(int fd, std::chrono::milliseconds limit) {
    std::string buffer;
    const auto deadline = std::chrono::steady_clock::now() + limit;
    char chunk[4096];
    while (true) {
      auto frames = decode_frames(buffer);
      if (!frames.empty()) return frames.front();
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r <= 0) continue;
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void reject(int fd, const std::string& code, const std::string& message) {
    send_all(fd, encode_frame(error_message(code, message)));
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }

  void accept_loop() {
    while (!stopping) {
      pollfd p{listen_fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r <= 0 || stopping) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      handshake(fd);
    }
  }

  void handshake(int fd) {
    std::optional<json> hello;
    try {
      hello = read_one(fd, std::chrono::milliseconds(5000));
    } catch (const std::exception& e) {
      reject(fd, "bad_frame", e.what());
      return;
    }
    if (!hello || !hello->is_object() || hello->value("type", "") != "hello") {
      reject(fd, "bad_hello", "expected a hello message first");
      return;
    }
    if (hello->value("protocol", -1) != kProtocolVersion) {
      reject(fd, "protocol_mismatch",
             "server speaks protocol " + std::to_string(kProtocolVersion));
      return;
    }
    if (hello->value("session", "") != config.session) {
      reject(fd, "unknown_session", "no session named '" + hello->value("session", "") + "'");
      return;
    }
    if (!config.token.empty() && hello->value("token", "") != config.token) {
      reject(fd, "unauthorized", "session token rejected");
      return;
    }
    std::unique_lock lk(mu);
    if (console_fd >= 0) {
      lk.unlock();
      reject(fd, "session_busy", "a console is already attached to this session");
      return;
    }
    // The previous reader has exited; reap it before starting a new one.
    if (reader_thread.joinable()) {
      lk.unlock();
      reader_thread.join();
      lk.lock();
    }
    console_fd = fd;
    const std::uint64_t id = ++connection_id;
    const json sync = resync_message();
    lk.unlock();
    {
      std::lock_guard wl(write_mu);
      send_all(fd, encode_frame(sync));
    }
    cv.notify_all();
    reader_thread = std::thread([this, fd, id] { read_loop(fd, id); });
  }

  void read_loop(int fd, std::uint64_t id) {
    std::string buffer;
    char chunk[4096];
    while (!stopping) {
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r == 0) continue;
      if (r < 0 && errno == EINTR) continue;
      const ssize_t n = r > 0 ? ::recv(fd, chunk, sizeof chunk, 0) : -1;
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::vector<json> frames;
      try {
        frames = decode_frames(buffer);
      } catch (const std::exception& e) {
        send(error_message("bad_frame", e.what()));
        break;
      }
      for (const auto& m : frames) handle(m);
    }
    std::lock_guard lk(mu);
    if (connection_id == id && console_fd == fd) {
      ::close(fd);
      console_fd = -1;
    }
    cv.notify_all();
  }

  void handle(const json& m) {
    const std::string type = m.is_object() ? m.value("type", "") : "";
    if (type != "human_action") {
      send(error_message("unsupported", "unexpected message type '" + type + "'"));
      return;
    }
    std::unique_lock lk(mu);
    if (!pending) {
      lk.unlock();
      send(error_message("no_request", "no intervention request is outstanding"));
      return;
    }
    const json resend = *pending;
    if (!m.contains("t") || !m.at("t").is_number_integer() || m.at("t").get<int>() != pending_t) {
      lk.unlock();
      send(error_message("stale_t", "human_action must echo t=" + std::to_string(pending_t)));
      send(resend);
      return;
    }
    Vector a;
    bool ok = m.contains("action") && m.at("action").is_array() &&
              m.at("action").size() == static_cast<std::size_t>(low.size());
    if (ok) {
      a.resize(low.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        const auto& v = m.at("action")[static_cast<std::size_t>(i)];
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          ok = false;
          break;
        }
        a(i) = v.get<double>();
      }
    }
    if (!ok) {
      lk.unlock();
      send(error_message("bad_action", "action must be " + std::to_string(low.size()) +
                                           " finite numbers"));
      send(resend);
      return;
    }
    answer = EnvAction{a.cwiseMax(low).cwiseMin(high)};
    pending.reset();
    cv.notify_all();
  }
};

InterventionService::InterventionService(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

InterventionService::~InterventionService() {
  if (impl_) impl_->shutdown();
}

std::unique_ptr<InterventionService> InterventionService::start(const ServiceConfig& config) {
  Vector low = Vector::Constant(2, -1.0);
  Vector high = Vector::Constant(2, 1.0);
  return start(config, low, high);
}

std::unique_ptr<InterventionService> InterventionService::start(const ServiceConfig& config,
                                                                const Vector& action_low,
                                                                const Vector& action_high) {
  if (config.session.empty()) throw ConfigError("session: must not be empty");
  if (config.decimation < 1) throw ConfigError("decimation: must be >= 1");
  {
    std::lock_guard lk(g_sessions_mu);
    if (!g_sessions.insert(config.session).second) {
      throw ConfigError("session: '" + config.session + "' is already being served");
    }
  }
  auto impl = std::make_unique<Impl>();
  impl->config = config;
  impl->low = action_low;
  impl->high = action_high;

  auto release = [&] {
    std::lock_guard lk(g_sessions_mu);
    g_sessions.erase(config.session);
  };

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    release();
    throw IoError(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(config.port));
  if (::inet_pton(AF_INET, config.bind.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    release();
    throw IoError("bind: '" + config.bind + "' is not an IPv4 address");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    release();
    throw IoError("bind " + config.bind + ":" + std::to_string(config.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl->listen_fd = fd;
  impl->port = ntohs(addr.sin_port);

  if (config.health_port >= 0) {
    impl->health_server = std::make_unique<httplib::Server>();
    Impl* raw = impl.get();
    impl->health_server->Get("/health", [raw](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lk(raw->mu);
      const json doc = {{"session", raw->config.session},
                        {"phase", to_string(raw->phase)},
                        {"console_connected", raw->console_fd >= 0},
                        {"protocol", kProtocolVersion}};
      res.set_content(doc.dump(), "application/json");
    });
    if (config.health_port == 0) {
      impl->health_port = impl->health_server->bind_to_any_port(config.bind);
    } else if (impl->health_server->bind_to_port(config.bind, config.health_port)) {
      impl->health_port = config.health_port;
    } else {
      impl->health_port = -1;
    }
    if (impl->health_port < 0) {
      ::close(fd);
      impl->listen_fd = -1;
      impl->stopping = true;
      release();
      throw IoError("health endpoint: cannot bind " + config.bind + ":" +
                    std::to_string(config.health_port));
    }
    impl->health_thread = std::thread([raw] { raw->health_server->listen_after_bind(); });
  }
  Impl* raw = impl.get();
  impl->accept_thread = std::thread([raw] { raw->accept_loop(); });
  return std::unique_ptr<InterventionService>(new InterventionService(std::move(impl)));
}

void InterventionService::stop() { impl_->shutdown(); }
int InterventionService::port() const { return impl_->port; }
int InterventionService::health_port() const { return impl_->health_port; }
const std::string& InterventionService::session() const { return impl_->config.session; }

SessionPhase InterventionService::phase() const {
  std::lock_guard lk(impl_->mu);
  return impl_->phase;
}

bool InterventionService::console_connected() const {
  std::lock_guard lk(impl_->mu);
  return impl_->console_fd >= 0;
}

json InterventionService::health() const {
  std::lock_guard lk(impl_->mu);
  return {{"session", impl_->config.session},
          {"phase", to_string(impl_->phase)},
          {"console_connected", impl_->console_fd >= 0},
          {"protocol", kProtocolVersion}};
}

bool InterventionService::wait_for_console(std::chrono::duration<double> timeout) const {
  std::unique_lock lk(impl_->mu);
  return impl_->cv.wait_for(lk, timeout,
                            [&] { return impl_->console_fd >= 0 || impl_->stopping.load(); }) &&
         impl_->console_fd >= 0;
}

void InterventionService::set_action_bounds(const Vector& low, const Vector& high) {
  std::lock_guard lk(impl_->mu);
  impl_->low = low;
  impl_->high = high;
}

EnvAction InterventionService::request_intervention(const InterventionRequest& request) {
  auto& s = *impl_;
  std::unique_lock lk(s.mu);
  if (s.stopping) throw SupervisorUnavailable(SupervisorUnavailable::Reason::Stopped, "service stopped");
  if (s.pending) throw ContractViolation("an intervention request is already outstanding");
  if (request.robot_action.dim() != s.low.size()) {
    throw ContractViolation("robot action dimension does not match the action bounds");
  }
  const json message = {{"type", "request_intervention"},
                        {"protocol", kProtocolVersion},
                        {"session", s.config.session},
                        {"request_id", s.next_request_id++},
                        {"epoch", request.epoch},
                        {"episode", request.episode},
                        {"t", request.t},
                        {"state", vec_json(request.state.values)},
                        {"scene", request.scene},
                        {"robot_action", vec_json(request.robot_action.values)},
                        {"thresholds",
                         {{"tau_sup", request.thresholds.tau_sup},
                          {"tau_auto", request.thresholds.tau_auto}}},
                        {"action_low", vec_json(s.low)},
                        {"action_high", vec_json(s.high)}};
  s.pending = message;
  s.pending_t = request.t;
  s.answer.reset();
  s.phase = SessionPhase::AwaitingHuman;
  lk.unlock();
  s.send(message);
  lk.lock();

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(s.config.timeout);
  s.cv.wait_until(lk, deadline, [&] { return s.answer.has_value() || s.stopping.load(); });
  if (s.answer) {
    EnvAction a = *s.answer;
    s.answer.reset();
    return a;
  }
  s.pending.reset();
  s.phase = SessionPhase::Idle;
  if (s.stopping) {
    throw SupervisorUnavailable(SupervisorUnavailable::Reason::Stopped, "service stopped");
  }
  if (s.console_fd < 0) {
    throw SupervisorUnavailable(SupervisorUnavailable::Reason::Disconnected,
                                "no console attached before the intervention timeout");
  }
  throw SupervisorUnavailable(SupervisorUnavailable::Reason::Timeout,
                              "no human action within the intervention timeout");
}

void InterventionService::broadcast_mode(Mode mode, const json& summary) {
  auto& s = *impl_;
  json message;
  {
    std::lock_guard lk(s.mu);
    s.mode = mode;
    if (summary.contains("counts")) s.counts = summary.at("counts");
    s.phase = mode == Mode::Supervisor ? SessionPhase::AwaitingHuman
                                       : SessionPhase::AutonomousStreaming;
    message = summary;
    message["type"] = "mode_update";
    message["protocol"] = kProtocolVersion;
    message["session"] = s.config.session;
    message["mode"] = to_string(mode);
  }
  s.send(message);
}

void InterventionService::broadcast_step(const json& summary) {
  auto& s = *impl_;
  json message;
  {
    std::lock_guard lk(s.mu);
    if (summary.contains("counts")) s.counts = summary.at("counts");
    if (s.phase == SessionPhase::Idle) s.phase = SessionPhase::AutonomousStreaming;
    const bool due = s.autonomous_steps % static_cast<std::uint64_t>(s.config.decimation) == 0;
    ++s.autonomous_steps;
    if (!due) return;
    message = summary;
    message["type"] = "step_summary";
    message["protocol"] = kProtocolVersion;
    message["session"] = s.config.session;
  }
  s.send(message);
}

void InterventionService::set_episode_context(const json& context) {
  std::lock_guard lk(impl_->mu);
  impl_->episode_context = context;
}

// RemoteSupervisor ---------------------------------------------------------------

RemoteSupervisor::RemoteSupervisor(InterventionService& service, const Environment& env,
                                   ThresholdPair thresholds)
    : service_(service), env_(env), thresholds_(thresholds) {
  service_.set_action_bounds(env.spec().action_low, env.spec().action_high);
}

EnvAction RemoteSupervisor::query(const SupervisorQuery& q) {
  InterventionRequest r;
  r.epoch = q.epoch;
  r.episode = q.episode;
  r.t = q.t;
  r.state = q.state;
  r.scene = env_.scene();
  r.robot_action = q.robot_action;
  r.thresholds = thresholds_;
  return service_.request_intervention(r);
}

void RemoteSupervisor::on_episode_start(int epoch, int episode, const EnvState& state) {
  epoch_ = epoch;
  episode_ = episode;
  service_.set_episode_context({{"epoch", epoch},
                                {"episode", episode},
                                {"state", vec_json(state.values)},
                                {"scene", env_.scene()}});
  if (shown_mode_ != Mode::Autonomous) {
    shown_mode_ = Mode::Autonomous;
    service_.broadcast_mode(Mode::Autonomous, {{"epoch", epoch}, {"episode", episode}, {"t", 0}});
  }
}

void RemoteSupervisor::on_step(const StepRecord& record, Mode next_mode,
                               const RunningCounts& counts) {
  const json c = {{"C", counts.switches}, {"D", counts.supervisor_actions}};
  if (record.mode == Mode::Autonomous) {
    service_.broadcast_step({{"epoch", epoch_},
                             {"episode", episode_},
                             {"t", record.t},
                             {"state", vec_json(record.state.values)},
                             {"action", vec_json(record.executed_action.values)},
                             {"counts", c}});
  }
  if (next_mode != shown_mode_) {
    shown_mode_ = next_mode;
    service_.broadcast_mode(next_mode,
                            {{"epoch", epoch_}, {"episode", episode_}, {"t", record.t + 1}, {"counts", c}});
  }
}

}  // namespace ldg

#pragma once

#include "aif/scenario.hpp"
#include "aif/simulation.hpp"

#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace aif {

constexpr int kProtocolVersion = 1;

/// One line of the wire protocol: {"v", "seq", "kind", "session", "payload"}.
struct SessionMessage {
  long seq = 0;
  std::string kind;
  std::string session;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const;
  std::string to_line() const;  // compact JSON plus '\n'
};

/// Scenario used when a session is opened without one: stereo reaching with head tracking.
const nlohmann::json& default_session_scenario();

struct SessionOptions {
  /// A snapshot is emitted every `decimation` simulation steps while running.
  int decimation = 10;
  /// Wall-clock tick rate of the server loop; simulation time stays dt-exact.
  double rate_hz = 100.0;
  /// Older messages are dropped beyond this many; seq numbers are unaffected.
  std::size_t max_retained = 20000;
};

/// A live simulation driven by queued commands. Commands are applied only at
/// tick boundaries, in arrival order, and recorded in the command log with the
/// simulation step at which they took effect.
///
/// Command kinds: start, pause, step {n}, set_target {position | pixel},
/// displace_marker {offset}, set_noise {...}, set_precision {...}.
class Session {
 public:
  /// Throws ConfigError if the scenario is invalid.
  Session(std::string id, const nlohmann::json& scenario, SessionOptions options = {});

  const std::string& id() const { return id_; }

  /// Thread-safe; validated when applied, invalid commands yield an error message.
  void enqueue(const nlohmann::json& command);

  /// Applies pending commands, then advances one step if running.
  void tick();

  /// Messages with seq > after. With timeout_ms > 0 waits for at least one.
  std::vector<SessionMessage> messages_after(long after, int timeout_ms = 0);
  long last_seq() const;

  bool running() const;
  long steps() const;
  double rate_hz() const { return options_.rate_hz; }
  nlohmann::json command_log() const;
  nlohmann::json snapshot() const;
  /// CSV of every arm cycle so far.
  std::string trace_csv() const;

  /// Rebuilds a session headlessly from a scenario and a recorded command log,
  /// advancing to `total_steps`.
  static std::unique_ptr<Session> replay(const nlohmann::json& scenario, const nlohmann::json& log, long total_steps,
                                         SessionOptions options = {});

 private:
  void apply(const nlohmann::json& command);
  void advance();
  void emit(const std::string& kind, nlohmann::json payload);
  nlohmann::json snapshot_locked() const;

  std::string id_;
  nlohmann::json scenario_;
  SessionOptions options_;
  std::unique_ptr<Simulation> sim_;
  bool running_ = false;
  long steps_ = 0;
  CycleRecord last_;
  bool have_last_ = false;
  bool replaying_ = false;
  std::vector<TraceRow> trace_;
  std::vector<nlohmann::json> pending_;
  nlohmann::json log_ = nlohmann::json::array();
  std::deque<SessionMessage> messages_;
  long seq_ = 0;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

/// Owns sessions and their tick threads.
class SessionManager {
 public:
  ~SessionManager();
  /// Returns the new session id. Throws ConfigError on an invalid scenario.
  std::string open(const nlohmann::json& scenario, const SessionOptions& options);
  std::shared_ptr<Session> find(const std::string& id) const;
  bool close(const std::string& id);
  void close_all();

 private:
  struct Entry {
    std::shared_ptr<Session> session;
    std::thread worker;
    std::shared_ptr<std::atomic<bool>> stop;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;
  long next_id_ = 1;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  nlohmann::json default_scenario;
  SessionOptions session;
};

/// HTTP front end. Routes:
///   POST   /api/sessions                     {"scenario", "decimation", "rate_hz"} -> init + snapshot
///   POST   /api/sessions/{id}/commands       one command object, an array, or NDJSON lines
///   GET    /api/sessions/{id}/messages       ?after=N&wait_ms=M -> NDJSON
///   GET    /api/sessions/{id}/log            command log
///   GET    /api/sessions/{id}/trace.csv      arm trace so far
///   DELETE /api/sessions/{id}
/// plus static files from static_dir at /.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  /// Binds (port 0 picks a free port) and serves on a background thread; returns the port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  SessionManager& sessions() { return *sessions_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<SessionManager> sessions_;
};

/// Blocking entry point for the CLI.
int serve(const ServerOptions& options);

}  // namespace aif

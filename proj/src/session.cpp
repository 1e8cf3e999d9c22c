#include "aif/session.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace aif {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw ConfigError(std::string(what) + " must be an array of " + std::to_string(n) + " numbers");
  }
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) throw ConfigError(std::string(what) + " must contain numbers");
    v(i) = x.get<double>();
  }
  if (!v.allFinite()) throw ConfigError(std::string(what) + " must be finite");
  return v;
}

/// Number, or "inf" for a switched-off term.
double variance_from(const json& j, const char* what) {
  if (j.is_string() && (j == "inf" || j == "infinity")) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ConfigError(std::string(what) + " must be a number or \"inf\"");
  return j.get<double>();
}

}  // namespace

json SessionMessage::to_json() const {
  return {{"v", kProtocolVersion}, {"seq", seq}, {"kind", kind}, {"session", session}, {"payload", payload}};
}

std::string SessionMessage::to_line() const { return to_json().dump() + "\n"; }

const json& default_session_scenario() {
  static const json doc = json::parse(R"({
    "name": "interactive",
    "visual_mode": "stereo3d",
    "head_tracking": true,
    "precisions": {"sigma_sp": 1.0, "sigma_sv": 0.005, "sigma_smu": 0.05, "action_gain": 100},
    "head_precisions": {"sigma_sp": 1.0, "sigma_sv": 1.0, "sigma_smu": 0.05, "action_gain": 100},
    "attractor_gain": 1.0,
    "head_attractor_gain": 0.005,
    "targets": {"space": "world", "waypoints": [{"t": 0, "p": [0.30, -0.12, 0.40]}]},
    "reach": {"radius": 0.005, "units": "m"}
  })");
  return doc;
}

Session::Session(std::string id, const json& scenario, SessionOptions options)
    : id_(std::move(id)), scenario_(scenario), options_(options) {
  if (options_.decimation < 1) throw ConfigError("decimation must be >= 1");
  if (!(options_.rate_hz > 0.0)) throw ConfigError("rate_hz must be positive");
  const ScenarioConfig cfg = parse_scenario(scenario_);
  sim_ = std::make_unique<Simulation>(cfg, cfg.seed);
  std::lock_guard lock(mutex_);
  emit("init", {{"scenario", cfg.name},
                {"visual_mode", to_string(cfg.visual_mode)},
                {"target_space", cfg.targets.space() == TargetSpace::pixel ? "pixel" : "world"},
                {"dt", cfg.dt},
                {"decimation", options_.decimation},
                {"rate_hz", options_.rate_hz},
                {"arm_joints", cfg.arm.joint_names()},
                {"head_joints", cfg.head.joint_names()},
                {"image", {cfg.rig.left.width, cfg.rig.left.height}}});
  emit("snapshot", snapshot_locked());
}

void Session::enqueue(const json& command) {
  std::lock_guard lock(mutex_);
  pending_.push_back(command);
}

void Session::tick() {
  {
    std::lock_guard lock(mutex_);
    std::vector<json> batch;
    batch.swap(pending_);
    for (const json& c : batch) apply(c);
    if (running_) advance();
  }
  cv_.notify_all();
}

void Session::apply(const json& command) {
  const std::string kind = command.is_object() ? command.value("kind", std::string()) : std::string();
  const json payload = command.is_object() ? command.value("payload", json::object()) : json::object();
  try {
    if (!command.is_object()) throw ConfigError("command must be a JSON object");
    if (kind == "start") {
      running_ = true;
    } else if (kind == "pause") {
      running_ = false;
    } else if (kind == "step") {
      const long n = payload.value("n", 1L);
      if (n < 1) throw ConfigError("step n must be >= 1");
      log_.push_back({{"step", steps_}, {"kind", kind}, {"payload", payload}});
      emit(kind, payload);
      if (!replaying_) {
        for (long i = 0; i < n && sim_; ++i) advance();
        emit("snapshot", snapshot_locked());
      }
      return;
    } else if (kind == "set_target") {
      const bool pixel_space = sim_->schedule().space() == TargetSpace::pixel;
      if (payload.value("clear", false)) {
        sim_->set_target_override(std::nullopt);
      } else if (pixel_space) {
        if (!payload.contains("pixel")) throw ConfigError("set_target needs 'pixel' [u, v] in a pixel-space session");
        const Vec p = vec_from(payload.at("pixel"), 2, "pixel");
        sim_->set_target_override(Vec3(p(0), p(1), 0.0));
      } else {
        if (!payload.contains("position")) throw ConfigError("set_target needs 'position' [x, y, z] in metres");
        sim_->set_target_override(Vec3(vec_from(payload.at("position"), 3, "position")));
      }
    } else if (kind == "displace_marker") {
      if (!payload.contains("offset")) throw ConfigError("displace_marker needs 'offset' [x, y, z] in metres");
      sim_->set_marker_offset(Vec3(vec_from(payload.at("offset"), 3, "offset")));
    } else if (kind == "set_noise") {
      NoiseSpec n = sim_->plant().noise();
      auto num = [&](const char* key, double& field, double scale) {
        if (!payload.contains(key)) return;
        if (!payload.at(key).is_number()) throw ConfigError(std::string(key) + " must be a number");
        field = payload.at(key).get<double>() * scale;
      };
      num("encoder_sigma_deg", n.encoder_sigma, kPi / 180.0);
      num("head_encoder_sigma_deg", n.head_encoder_sigma, kPi / 180.0);
      num("pixel_sigma", n.pixel_sigma, 1.0);
      num("visual3d_sigma", n.visual3d_sigma, 1.0);
      n.validate();
      sim_->plant().set_noise(n);
    } else if (kind == "set_precision") {
      Precisions p = sim_->arm_precisions();
      double gain = sim_->attractor_gain();
      if (payload.contains("sigma_sp")) p.sigma_sp = variance_from(payload.at("sigma_sp"), "sigma_sp");
      if (payload.contains("sigma_sv")) p.sigma_sv = variance_from(payload.at("sigma_sv"), "sigma_sv");
      if (payload.contains("sigma_smu")) p.sigma_smu = variance_from(payload.at("sigma_smu"), "sigma_smu");
      if (payload.contains("action_gain")) p.action_gain = variance_from(payload.at("action_gain"), "action_gain");
      if (payload.contains("attractor_gain")) gain = variance_from(payload.at("attractor_gain"), "attractor_gain");
      p.validate();
      if (!std::isfinite(gain) || gain < 0.0) throw ConfigError("attractor_gain must be finite and >= 0");
      sim_->arm_precisions() = p;
      sim_->attractor_gain() = gain;
    } else {
      throw ConfigError("unknown command kind '" + kind + "'");
    }
  } catch (const std::exception& e) {
    emit("error", {{"message", e.what()}, {"command", command}});
    return;
  }
  log_.push_back({{"step", steps_}, {"kind", kind}, {"payload", payload}});
  emit(kind, payload);
}

void Session::advance() {
  try {
    last_ = sim_->step();
  } catch (const NumericError& e) {
    running_ = false;
    emit("error", {{"message", e.what()}, {"numeric", true}});
    return;
  }
  have_last_ = true;
  trace_.push_back(last_.arm);
  ++steps_;
  if (running_ && steps_ % options_.decimation == 0) emit("snapshot", snapshot_locked());
}

void Session::emit(const std::string& kind, json payload) {
  messages_.push_back({++seq_, kind, id_, std::move(payload)});
  while (messages_.size() > options_.max_retained) messages_.pop_front();
}

json Session::snapshot_locked() const {
  const PlantState& s = sim_->plant().state();
  const BeliefState& b = sim_->arm_belief();
  const BeliefState& h = sim_->head_belief();
  json snap = {{"step", steps_},
               {"time", s.time},
               {"running", running_},
               {"q", vec_json(s.q_arm)},
               {"mu", vec_json(b.mu)},
               {"mu_prime", vec_json(b.mu_prime)},
               {"a", vec_json(b.action)},
               {"target", vec_json(sim_->current_target())},
               {"marker_offset", vec_json(s.marker_offset)},
               {"marker_world", vec_json(sim_->plant().marker_world())},
               {"head", {{"q", vec_json(s.q_head)}, {"mu", vec_json(h.mu)}, {"a", vec_json(h.action)}}}};
  // sensor values and energies come from the last completed cycle
  if (have_last_) {
    snap["s_p"] = vec_json(last_.arm.s_p);
    snap["s_v"] = last_.arm.s_v_valid ? vec_json(last_.arm.s_v) : json(nullptr);
    snap["s_v_valid"] = last_.arm.s_v_valid;
    snap["F_arm"] = last_.arm.free_energy;
    snap["F_head"] = last_.head_free_energy;
    snap["marker_pixel"] = vec_json(last_.marker_pixel);
    snap["marker_in_view"] = last_.marker_in_view;
    snap["target_pixel"] = vec_json(last_.target_pixel);
    snap["target_in_view"] = last_.target_in_view;
  } else {
    for (const char* k : {"s_p", "s_v", "s_v_valid", "F_arm", "F_head", "marker_pixel", "marker_in_view",
                          "target_pixel", "target_in_view"}) {
      snap[k] = nullptr;
    }
  }
  return snap;
}

std::vector<SessionMessage> Session::messages_after(long after, int timeout_ms) {
  std::unique_lock lock(mutex_);
  if (timeout_ms > 0) {
    cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return seq_ > after; });
  }
  std::vector<SessionMessage> out;
  for (const SessionMessage& m : messages_) {
    if (m.seq > after) out.push_back(m);
  }
  return out;
}

long Session::last_seq() const {
  std::lock_guard lock(mutex_);
  return seq_;
}

bool Session::running() const {
  std::lock_guard lock(mutex_);
  return running_;
}

long Session::steps() const {
  std::lock_guard lock(mutex_);
  return steps_;
}

json Session::command_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

json Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_locked();
}

std::string Session::trace_csv() const {
  std::lock_guard lock(mutex_);
  return aif::trace_csv(sim_->arm_layout(), trace_);
}

std::unique_ptr<Session> Session::replay(const json& scenario, const json& log, long total_steps,
                                         SessionOptions options) {
  auto s = std::make_unique<Session>("replay", scenario, options);
  std::lock_guard lock(s->mutex_);
  s->replaying_ = true;
  for (const json& entry : log) {
    const long at = entry.at("step").get<long>();
    while (s->steps_ < at) s->advance();
    s->apply({{"kind", entry.at("kind")}, {"payload", entry.at("payload")}});
  }
  while (s->steps_ < total_steps) s->advance();
  s->replaying_ = false;
  return s;
}

SessionManager::~SessionManager() { close_all(); }

std::string SessionManager::open(const json& scenario, const SessionOptions& options) {
  std::unique_lock lock(mutex_);
  const std::string id = "s" + std::to_string(next_id_);
  lock.unlock();
  auto session = std::make_shared<Session>(id, scenario, options);
  lock.lock();
  ++next_id_;
  auto stop = std::make_shared<std::atomic<bool>>(false);
  std::thread worker([session, stop] {
    const auto period = std::chrono::duration<double>(1.0 / session->rate_hz());
    auto next = std::chrono::steady_clock::now();
    while (!stop->load()) {
      session->tick();
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  });
  entries_.emplace(id, Entry{session, std::move(worker), stop});
  return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : it->second.session;
}

bool SessionManager::close(const std::string& id) {
  Entry entry;
  {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(id);
    if (it == entries_.end()) return false;
    entry = std::move(it->second);
    entries_.erase(it);
  }
  entry.stop->store(true);
  if (entry.worker.joinable()) entry.worker.join();
  return true;
}

void SessionManager::close_all() {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, e] : entries_) ids.push_back(id);
  }
  for (const std::string& id : ids) close(id);
}

struct Server::Impl {
  ServerOptions options;
  httplib::Server http;
  std::thread thread;
  int port = 0;
};

namespace {

json error_body(const std::string& message) {
  return SessionMessage{0, "error", "", {{"message", message}}}.to_json();
}

std::vector<json> parse_commands(const std::string& body) {
  std::vector<json> out;
  const json doc = json::parse(body, nullptr, false);
  if (!doc.is_discarded()) {
    if (doc.is_array()) {
      for (const json& c : doc) out.push_back(c);
    } else {
      out.push_back(doc);
    }
    return out;
  }
  std::istringstream lines(body);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>()), sessions_(std::make_unique<SessionManager>()) {
  impl_->options = std::move(options);
  if (impl_->options.default_scenario.is_null()) impl_->options.default_scenario = default_session_scenario();
  httplib::Server& http = impl_->http;
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  http.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      json scenario = body.value("scenario", impl_->options.default_scenario);
      SessionOptions so = impl_->options.session;
      so.decimation = body.value("decimation", so.decimation);
      so.rate_hz = body.value("rate_hz", so.rate_hz);
      const std::string id = sessions_->open(scenario, so);
      json messages = json::array();
      for (const SessionMessage& m : sessions_->find(id)->messages_after(0)) messages.push_back(m.to_json());
      res.status = 201;
      res.set_content(json{{"session", id}, {"messages", messages}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });

  http.Post(R"(/api/sessions/([^/]+)/commands)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = sessions_->find(req.matches[1]);
    if (!session) {
      res.status = 404;
      res.set_content(error_body("no such session").dump(), "application/json");
      return;
    }
    try {
      const std::vector<json> commands = parse_commands(req.body);
      for (const json& c : commands) session->enqueue(c);
      res.set_content(json{{"queued", commands.size()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });

  http.Get(R"(/api/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = sessions_->find(req.matches[1]);
    if (!session) {
      res.status = 404;
      res.set_content(error_body("no such session").dump(), "application/json");
      return;
    }
    try {
      const long after = req.has_param("after") ? std::stol(req.get_param_value("after")) : 0L;
      const int wait = req.has_param("wait_ms") ? std::min(std::stoi(req.get_param_value("wait_ms")), 30000) : 0;
      std::string out;
      for (const SessionMessage& m : session->messages_after(after, wait)) out += m.to_line();
      res.set_content(out, "application/x-ndjson");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });

  http.Get(R"(/api/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = sessions_->find(req.matches[1]);
    if (!session) {
      res.status = 404;
      return;
    }
    res.set_content(json{{"steps", session->steps()}, {"log", session->command_log()}}.dump(), "application/json");
  });

  http.Get(R"(/api/sessions/([^/]+)/trace\.csv)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto session = sessions_->find(req.matches[1]);
    if (!session) {
      res.status = 404;
      return;
    }
    res.set_content(session->trace_csv(), "text/csv");
  });

  http.Delete(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    res.status = sessions_->close(req.matches[1]) ? 204 : 404;
  });

  if (!impl_->options.static_dir.empty() && !http.set_mount_point("/", impl_->options.static_dir)) {
    throw ConfigError("static directory '" + impl_->options.static_dir + "' does not exist");
  }
}

Server::~Server() { stop(); }

int Server::start() {
  auto& o = impl_->options;
  impl_->port = o.port == 0 ? impl_->http.bind_to_any_port(o.host) : (impl_->http.bind_to_port(o.host, o.port) ? o.port : -1);
  if (impl_->port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return impl_->port;
}

void Server::run() {
  auto& o = impl_->options;
  if (!impl_->http.listen(o.host, o.port)) throw std::runtime_error("cannot listen on " + o.host + ":" + std::to_string(o.port));
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  sessions_->close_all();
}

int serve(const ServerOptions& options) {
  Server server(options);
  std::cout << "serving on http://" << options.host << ':' << options.port << '\n' << std::flush;
  server.run();
  return 0;
}

}  // namespace aif

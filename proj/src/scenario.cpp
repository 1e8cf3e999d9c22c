#include "aif/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace aif {

using nlohmann::json;

namespace {

// Approximate iCub-scale upper body. World frame: x forward, y left, z up.
// Arm: torso_yaw, shoulder flexion ("shoulder_roll"), upper-arm twist
// ("shoulder_yaw"), elbow. At zero angles the upper arm hangs down from a
// shoulder 0.15 m right of the torso axis and the forearm points forward.
// Head: neck_pitch (positive looks down), neck_yaw (positive looks left),
// eyes_tilt. Cameras: z optical axis, x right, y down.
constexpr const char* kDefaultRobot = R"({
  "arm": {
    "base": {"xyz": [0, 0, 0], "rpy_deg": [0, 0, 0]},
    "joints": [
      {"name": "torso_yaw",     "a": 0.0,  "alpha_deg": 90, "d": 0.45, "theta_offset_deg": 0,
       "lower_deg": -50, "upper_deg": 50, "vel_limit_deg_s": 40},
      {"name": "shoulder_roll", "a": 0.0,  "alpha_deg": 90, "d": 0.15, "theta_offset_deg": 0,
       "lower_deg": -20, "upper_deg": 120, "vel_limit_deg_s": 40},
      {"name": "shoulder_yaw",  "a": 0.0,  "alpha_deg": 90, "d": 0.25, "theta_offset_deg": 0,
       "lower_deg": -80, "upper_deg": 80, "vel_limit_deg_s": 40},
      {"name": "r_elbow",       "a": 0.25, "alpha_deg": 0,  "d": 0.0,  "theta_offset_deg": 0,
       "lower_deg": -85, "upper_deg": 80, "vel_limit_deg_s": 40}
    ],
    "initial_deg": [0, 30, -15, 0],
    "locked": []
  },
  "head": {
    "base": {"xyz": [0, 0, 0.55], "rpy_deg": [-90, 0, 0]},
    "joints": [
      {"name": "neck_pitch", "a": 0.0,  "alpha_deg": 90,  "d": 0.0, "theta_offset_deg": 0,
       "lower_deg": -40, "upper_deg": 60, "vel_limit_deg_s": 40},
      {"name": "neck_yaw",   "a": 0.0,  "alpha_deg": -90, "d": 0.1, "theta_offset_deg": 0,
       "lower_deg": -55, "upper_deg": 55, "vel_limit_deg_s": 40},
      {"name": "eyes_tilt",  "a": 0.05, "alpha_deg": 0,   "d": 0.0, "theta_offset_deg": 0,
       "lower_deg": -35, "upper_deg": 35, "vel_limit_deg_s": 40}
    ],
    "initial_deg": [40, -15, 0]
  },
  "cameras": {
    "left":  {"fx": 257, "fy": 257, "cx": 160, "cy": 120, "width": 320, "height": 240,
              "xyz": [0, 0, 0.034], "rpy_deg": [0, 90, 0]},
    "right": {"fx": 257, "fy": 257, "cx": 160, "cy": 120, "width": 320, "height": 240,
              "xyz": [0, 0, -0.034], "rpy_deg": [0, 90, 0]}
  }
})";

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("scenario: " + msg); }

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    fail(std::string("'") + key + "' must be a number");
  }
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

Vec vector_of(const json& j, const char* what, double scale = 1.0) {
  if (!j.is_array()) fail(std::string(what) + " must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(std::string(what) + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>() * scale;
  }
  return v;
}

Vec3 vec3_of(const json& j, const char* what) {
  const Vec v = vector_of(j, what);
  if (v.size() != 3) fail(std::string(what) + " must have 3 entries");
  return v;
}

RigidTransform pose_of(const json& j) {
  const Vec3 xyz = j.contains("xyz") ? vec3_of(j.at("xyz"), "xyz") : Vec3::Zero();
  const Vec3 rpy = j.contains("rpy_deg") ? vec3_of(j.at("rpy_deg"), "rpy_deg") : Vec3::Zero();
  return RigidTransform::from_rpy(xyz, deg2rad(rpy[0]), deg2rad(rpy[1]), deg2rad(rpy[2]));
}

PinholeCamera camera_of(const json& j) {
  PinholeCamera c;
  c.fx = number(j, "fx", c.fx);
  c.fy = number(j, "fy", c.fy);
  c.cx = number(j, "cx", c.cx);
  c.cy = number(j, "cy", c.cy);
  c.width = static_cast<int>(number(j, "width", c.width));
  c.height = static_cast<int>(number(j, "height", c.height));
  c.mount = pose_of(j);
  c.validate();
  return c;
}

Precisions precisions_of(const json& j, double dt) {
  Precisions p;
  p.sigma_sp = number(j, "sigma_sp", p.sigma_sp);
  p.sigma_sv = number(j, "sigma_sv", p.sigma_sv);
  p.sigma_smu = number(j, "sigma_smu", p.sigma_smu);
  p.action_gain = number(j, "action_gain", p.action_gain);
  p.dt = dt;
  p.validate();
  return p;
}

Vec initial_of(const json& chain_doc, const KinematicChain& chain) {
  if (!chain_doc.contains("initial_deg")) return Vec::Zero(chain.dof());
  const Vec q = vector_of(chain_doc.at("initial_deg"), "initial_deg", kPi / 180.0);
  chain.check_dimension(q, "initial_deg");
  return q;
}

Vec active_of(const json& chain_doc, const KinematicChain& chain) {
  Vec active = Vec::Ones(chain.dof());
  if (!chain_doc.contains("locked")) return active;
  for (const auto& name : chain_doc.at("locked")) {
    const auto& names = chain.joint_names();
    const auto it = std::find(names.begin(), names.end(), name.get<std::string>());
    if (it == names.end()) fail("locked joint '" + name.get<std::string>() + "' does not exist");
    active[it - names.begin()] = 0.0;
  }
  return active;
}

std::vector<double> list_of(const json& j, const char* key, double scale = 1.0) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  const Vec v = vector_of(j.at(key), key, scale);
  out.assign(v.data(), v.data() + v.size());
  return out;
}

}  // namespace

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::trial: return "trial";
    case Experiment::reaching_2d: return "reaching_2d";
    case Experiment::noise_sweep: return "noise_sweep";
    case Experiment::adaptation: return "adaptation";
    case Experiment::comparison: return "comparison";
    case Experiment::moving_target: return "moving_target";
  }
  return "trial";
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::trial, Experiment::reaching_2d, Experiment::noise_sweep, Experiment::adaptation,
                 Experiment::comparison, Experiment::moving_target}) {
    if (name == to_string(e)) return e;
  }
  fail("unknown experiment '" + name + "'");
}

const json& default_robot_json() {
  static const json doc = json::parse(kDefaultRobot);
  return doc;
}

KinematicChain parse_chain(const json& j) {
  if (!j.contains("joints") || !j.at("joints").is_array() || j.at("joints").empty()) {
    fail("chain needs a non-empty 'joints' array");
  }
  std::vector<DhLink> links;
  std::vector<std::string> names;
  const auto n = static_cast<Eigen::Index>(j.at("joints").size());
  Vec lower(n);
  Vec upper(n);
  Vec vel(n);
  Eigen::Index i = 0;
  for (const auto& row : j.at("joints")) {
    links.push_back({number(row, "a", 0.0), deg2rad(number(row, "alpha_deg", 0.0)), number(row, "d", 0.0),
                     deg2rad(number(row, "theta_offset_deg", 0.0))});
    names.push_back(row.value("name", "joint" + std::to_string(i)));
    lower[i] = deg2rad(number(row, "lower_deg", -180.0));
    upper[i] = deg2rad(number(row, "upper_deg", 180.0));
    vel[i] = deg2rad(number(row, "vel_limit_deg_s", 40.0));
    ++i;
  }
  const RigidTransform base = j.contains("base") ? pose_of(j.at("base")) : RigidTransform{};
  return {links, lower, upper, vel, base, names};
}

KinematicChain default_arm_chain() { return parse_chain(default_robot_json().at("arm")); }
KinematicChain default_head_chain() { return parse_chain(default_robot_json().at("head")); }
CameraRig default_rig() { return parse_rig(default_robot_json().at("cameras")); }

CameraRig parse_rig(const json& j) {
  if (!j.contains("left") || !j.contains("right")) fail("cameras need 'left' and 'right'");
  CameraRig rig{camera_of(j.at("left")), camera_of(j.at("right"))};
  rig.validate();
  return rig;
}

void ScenarioConfig::validate() const {
  if (trials < 1) fail("trials must be at least 1");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (max_steps < 1) fail("max_steps must be positive");
  if (!(reach.radius > 0.0)) fail("reach radius must be positive");
  if (reach.dwell < 0.0) fail("reach dwell must be non-negative");
  arm_precisions.validate();
  head_precisions.validate();
  noise.validate();
  mismatch.validate(arm.dof());
  rig.validate();
  arm.check_dimension(arm_initial, "arm initial");
  arm.check_dimension(arm_active, "arm active mask");
  head.check_dimension(head_initial, "head initial");
  if (attractor_gain < 0.0 || head_attractor_gain < 0.0) fail("attractor gains must be non-negative");
  if (visual_mode == VisualMode::stereo3d && targets.space() == TargetSpace::pixel) {
    fail("pixel-space targets require visual_mode pixel2d");
  }
  if (head_tracking && targets.space() == TargetSpace::pixel) fail("head tracking needs world-space targets");
  if (reach.units == ReachUnits::px && visual_mode != VisualMode::pixel2d) fail("px reach units need pixel2d mode");
}

ScenarioConfig parse_scenario(const json& doc_in) {
  if (!doc_in.is_object()) fail("document must be a JSON object");
  json doc = default_robot_json();
  doc.merge_patch(doc_in);

  ScenarioConfig cfg;
  cfg.arm = parse_chain(doc.at("arm"));
  cfg.head = parse_chain(doc.at("head"));
  cfg.source = doc_in;
  cfg.name = doc.value("name", std::string("scenario"));
  cfg.experiment = experiment_from_string(doc.value("experiment", std::string("trial")));
  cfg.seed = doc.value("seed", std::uint64_t{1});
  cfg.trials = doc.value("trials", 1);
  cfg.dt = number(doc, "dt", 0.01);
  cfg.max_steps = doc.value("max_steps", 2000L);

  cfg.arm_initial = initial_of(doc.at("arm"), cfg.arm);
  cfg.arm_active = active_of(doc.at("arm"), cfg.arm);
  cfg.head_initial = initial_of(doc.at("head"), cfg.head);
  cfg.rig = parse_rig(doc.at("cameras"));

  cfg.visual_mode = visual_mode_from_string(doc.value("visual_mode", std::string("stereo3d")));
  cfg.head_tracking = doc.value("head_tracking", false);
  cfg.arm_precisions = precisions_of(doc.value("precisions", json::object()), cfg.dt);
  cfg.head_precisions = precisions_of(doc.value("head_precisions", json::object()), cfg.dt);
  cfg.attractor_gain = number(doc, "attractor_gain", 1.0);
  cfg.head_attractor_gain = number(doc, "head_attractor_gain", 1.0);
  cfg.dynamics_cap_factor = number(doc, "dynamics_cap_factor", 2.0);

  const json noise = doc.value("noise", json::object());
  cfg.noise.encoder_sigma = deg2rad(number(noise, "encoder_sigma_deg", 0.0));
  cfg.noise.head_encoder_sigma = deg2rad(number(noise, "head_encoder_sigma_deg", 0.0));
  cfg.noise.pixel_sigma = number(noise, "pixel_sigma", 0.0);
  cfg.noise.visual3d_sigma = number(noise, "visual3d_sigma", 0.0);
  cfg.noise.seed = cfg.seed;

  const json mismatch = doc.value("mismatch", json::object());
  if (mismatch.contains("link_scale")) cfg.mismatch.link_scale = vector_of(mismatch.at("link_scale"), "link_scale");
  if (mismatch.contains("encoder_offset_deg")) {
    cfg.mismatch.encoder_offset = vector_of(mismatch.at("encoder_offset_deg"), "encoder_offset_deg", kPi / 180.0);
  }

  const json reach = doc.value("reach", json::object());
  cfg.reach.radius = number(reach, "radius", cfg.visual_mode == VisualMode::pixel2d ? 5.0 : 0.005);
  const std::string units = reach.value("units", std::string(cfg.visual_mode == VisualMode::pixel2d ? "px" : "m"));
  if (units == "px") {
    cfg.reach.units = ReachUnits::px;
  } else if (units == "m") {
    cfg.reach.units = ReachUnits::m;
  } else if (units == "cm") {
    cfg.reach.units = ReachUnits::m;
    cfg.reach.radius /= 100.0;
  } else {
    fail("reach units must be px, m or cm");
  }
  cfg.reach.dwell = number(reach, "dwell", 0.0);
  cfg.stop_on_reach = doc.value("stop_on_reach", false);
  cfg.initial_jitter = deg2rad(number(doc, "initial_jitter_deg", 0.0));
  cfg.noise_levels = list_of(doc, "noise_levels_deg", kPi / 180.0);

  if (doc.contains("adaptation")) {
    const json& a = doc.at("adaptation");
    cfg.adaptation.settle_time = number(a, "settle_time", cfg.adaptation.settle_time);
    cfg.adaptation.observe_time = number(a, "observe_time", cfg.adaptation.observe_time);
    for (const auto& p : a.value("presets", json::array())) {
      MarkerPreset preset;
      preset.name = p.value("name", std::string("preset"));
      if (p.contains("offset")) preset.offset = vec3_of(p.at("offset"), "preset offset");
      preset.toward_elbow = number(p, "toward_elbow", 0.0);
      cfg.adaptation.presets.push_back(preset);
    }
  }
  if (doc.contains("comparison")) {
    const json& c = doc.at("comparison");
    if (c.contains("prism_center")) cfg.comparison.prism_center = vec3_of(c.at("prism_center"), "prism_center");
    if (c.contains("prism_size")) cfg.comparison.prism_size = vec3_of(c.at("prism_size"), "prism_size");
    cfg.comparison.dwell = number(c, "dwell", cfg.comparison.dwell);
    cfg.comparison.ik_move_fraction = number(c, "ik_move_fraction", cfg.comparison.ik_move_fraction);
    cfg.comparison.error_window = number(c, "error_window", cfg.comparison.error_window);
  }
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    cfg.sweep.action_gain = list_of(s, "action_gain");
    cfg.sweep.attractor_gain = list_of(s, "attractor_gain");
    cfg.sweep.sigma_smu = list_of(s, "sigma_smu");
  }

  if (cfg.experiment == Experiment::comparison && !doc.contains("targets")) {
    cfg.targets = prism_schedule(cfg.comparison.prism_center, cfg.comparison.prism_size, cfg.comparison.dwell);
  } else if (doc.contains("targets")) {
    const json& t = doc.at("targets");
    const std::string space = t.value("space", std::string("world"));
    const std::string interp = t.value("interpolation", std::string("linear"));
    if (space != "world" && space != "pixel") fail("targets.space must be world or pixel");
    if (interp != "linear" && interp != "hold") fail("targets.interpolation must be linear or hold");
    std::vector<Waypoint> wps;
    for (const auto& w : t.value("waypoints", json::array())) {
      const Vec p = vector_of(w.at("p"), "waypoint p");
      if (p.size() != 2 && p.size() != 3) fail("waypoint p must have 2 or 3 entries");
      Vec3 p3 = Vec3::Zero();
      p3.head(p.size()) = p;
      wps.push_back({number(w, "t", 0.0), p3});
    }
    cfg.targets = TargetSchedule(wps, interp == "hold" ? Interpolation::hold : Interpolation::linear,
                                 space == "pixel" ? TargetSpace::pixel : TargetSpace::world);
  } else {
    fail("'targets' is required");
  }

  for (Precisions* p : {&cfg.arm_precisions, &cfg.head_precisions}) p->dt = cfg.dt;
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

}  // namespace aif

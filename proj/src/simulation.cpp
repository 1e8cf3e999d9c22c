#include "aif/simulation.hpp"

namespace aif {

namespace {

GenerativeModel make_arm_model(const ScenarioConfig& cfg) {
  GenerativeModel m(cfg.arm, cfg.head, cfg.rig, cfg.visual_mode);
  m.joint_active = cfg.arm_active;
  m.dynamics_cap_factor = cfg.dynamics_cap_factor;
  return m;
}

PlantState initial_state(const ScenarioConfig& cfg, const Vec& arm_initial) {
  PlantState s;
  s.q_arm = arm_initial;
  s.q_head = cfg.head_initial;
  return s;
}

}  // namespace

Simulation::Simulation(const ScenarioConfig& cfg, std::uint64_t seed) : Simulation(cfg, seed, cfg.arm_initial) {}

Simulation::Simulation(const ScenarioConfig& cfg, std::uint64_t seed, const Vec& arm_initial)
    : cfg_(cfg),
      arm_model_(make_arm_model(cfg)),
      head_model_{cfg.head, cfg.rig.left, cfg.dynamics_cap_factor},
      arm_prec_(cfg.arm_precisions),
      head_prec_(cfg.head_precisions),
      attractor_gain_(cfg.attractor_gain),
      plant_(cfg.arm, cfg.head, cfg.rig,
             [&] {
               NoiseSpec n = cfg.noise;
               n.seed = seed;
               return n;
             }(),
             cfg.mismatch, initial_state(cfg, arm_initial)),
      schedule_(cfg.targets) {
  // The controller starts out believing its (noise-free) encoders.
  Vec mu0 = plant_.state().q_arm;
  if (cfg.mismatch.encoder_offset.size() == mu0.size()) mu0 += cfg.mismatch.encoder_offset;
  arm_belief_ = BeliefState::at(mu0);
  head_belief_ = BeliefState::at(plant_.state().q_head);
}

Vec3 Simulation::current_target() const {
  if (target_override_) return *target_override_;
  return schedule_.current_target(plant_.state().time);
}

double Simulation::reach_error() const {
  const Vec3 target = current_target();
  const Vec3 marker = plant_.marker_world();
  if (cfg_.reach.units == ReachUnits::m) return (marker - target).norm();
  const Projection m = project(cfg_.rig.left, cfg_.head, plant_.state().q_head, marker);
  Vec2 t = target.head<2>();
  if (schedule_.space() == TargetSpace::world) t = project(cfg_.rig.left, cfg_.head, plant_.state().q_head, target).pixel;
  return (m.pixel - t).norm();
}

CycleRecord Simulation::step() {
  const double t = plant_.state().time;
  const Plant::Reading reading = plant_.sense(cfg_.visual_mode);
  const Vec3 target = current_target();
  const Vec& q_head_true = plant_.state().q_head;

  CycleRecord rec;
  rec.marker_world = plant_.marker_world();
  const Projection marker_px = project(cfg_.rig.left, cfg_.head, q_head_true, rec.marker_world);
  rec.marker_pixel = marker_px.pixel;
  rec.marker_in_view = marker_px.valid;
  if (schedule_.space() == TargetSpace::pixel) {
    rec.target_pixel = target.head<2>();
    rec.target_in_view = cfg_.rig.left.in_image(rec.target_pixel);
  } else {
    const Projection p = project(cfg_.rig.left, cfg_.head, q_head_true, target);
    rec.target_pixel = p.pixel;
    rec.target_in_view = p.valid;
  }
  rec.visual_error = reach_error();

  Attractor rho;
  rho.gain = attractor_gain_;
  rho.target = cfg_.visual_mode == VisualMode::stereo3d ? target : Vec3(rec.target_pixel.x(), rec.target_pixel.y(), 0.0);
  rho.pixel_target = rec.target_pixel;

  SensorFrame frame{reading.s_p, reading.marker.s_v, reading.marker.valid, t, reading.s_e};
  const double f_arm = free_energy(arm_model_, arm_belief_, frame, rho, arm_prec_);
  arm_belief_ = aif::step(arm_model_, arm_belief_, frame, rho, arm_prec_);

  Vec head_action = Vec::Zero(head_model_.n_p());
  double f_head = 0.0;
  if (cfg_.head_tracking) {
    HeadAttractor head_rho{rec.target_pixel, target, cfg_.head_attractor_gain, rec.target_in_view};
    HeadSensorFrame head_frame{reading.s_e, t};
    f_head = free_energy_head(head_model_, head_belief_, head_frame, head_rho, head_prec_);
    head_belief_ = step_head(head_model_, head_belief_, head_frame, head_rho, head_prec_);
    head_action = head_belief_.action;
  } else {
    head_belief_.mu = reading.s_e;
  }

  rec.arm.time = t;
  rec.arm.q = plant_.state().q_arm;
  rec.arm.s_p = reading.s_p;
  rec.arm.s_v = reading.marker.s_v;
  rec.arm.s_v_valid = reading.marker.valid;
  rec.arm.mu = arm_belief_.mu;
  rec.arm.mu_prime = arm_belief_.mu_prime;
  rec.arm.action = arm_belief_.action;
  rec.arm.free_energy = f_arm;
  rec.arm.target = target;

  rec.head.time = t;
  rec.head.q = q_head_true;
  rec.head.s_p = reading.s_e;
  rec.head.s_v = rec.target_pixel;
  rec.head.s_v_valid = rec.target_in_view;
  rec.head.mu = head_belief_.mu;
  rec.head.mu_prime = head_belief_.mu_prime;
  rec.head.action = head_action;
  rec.head.free_energy = f_head;
  rec.head.target = target;
  rec.head_free_energy = f_head;

  plant_.step(arm_belief_.action, head_action, cfg_.dt);
  return rec;
}

}  // namespace aif

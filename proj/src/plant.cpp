#include "aif/plant.hpp"

#include <algorithm>
#include <cmath>

namespace aif {

void NoiseSpec::validate() const {
  if (!(encoder_sigma >= 0.0) || !(head_encoder_sigma >= 0.0) || !(pixel_sigma >= 0.0) ||
      !(visual3d_sigma >= 0.0)) {
    throw ConfigError("noise: standard deviations must be non-negative");
  }
}

void MismatchSpec::validate(int n_arm) const {
  if (link_scale.size() != 0 && link_scale.size() != n_arm) {
    throw ConfigError("mismatch: link_scale needs one factor per arm link");
  }
  if (encoder_offset.size() != 0 && encoder_offset.size() != n_arm) {
    throw ConfigError("mismatch: encoder_offset needs one value per arm joint");
  }
  if (!link_scale.allFinite() || !encoder_offset.allFinite()) throw ConfigError("mismatch: values must be finite");
}

PlantState step_plant(const PlantState& state, const KinematicChain& arm, const KinematicChain& head,
                      const Vec& a_arm, const Vec& a_head, double dt) {
  PlantState next = state;
  next.q_arm = arm.clamp_to_limits(state.q_arm + arm.clamp_velocity(a_arm) * dt);
  next.q_head = head.clamp_to_limits(state.q_head + head.clamp_velocity(a_head) * dt);
  next.time = state.time + dt;
  return next;
}

double NoiseStream::gaussian(double sigma) { return sigma * normal_(engine_); }

Vec NoiseStream::gaussian(Eigen::Index n, double sigma) {
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = gaussian(sigma);
  return out;
}

Vec read_encoders(const PlantState& state, const NoiseSpec& noise, const MismatchSpec& mismatch, NoiseStream& rng) {
  Vec s_p = state.q_arm + rng.gaussian(state.q_arm.size(), noise.encoder_sigma);
  if (mismatch.encoder_offset.size() == s_p.size()) s_p += mismatch.encoder_offset;
  return s_p;
}

Vec read_head_encoders(const PlantState& state, const NoiseSpec& noise, NoiseStream& rng) {
  return state.q_head + rng.gaussian(state.q_head.size(), noise.head_encoder_sigma);
}

Vec3 marker_position(const PlantState& state, const KinematicChain& plant_arm) {
  return forward_kinematics(plant_arm, state.q_arm) + state.marker_offset;
}

MarkerObservation observe_marker(const PlantState& state, const KinematicChain& plant_arm,
                                 const KinematicChain& head, const CameraRig& rig, const NoiseSpec& noise,
                                 VisualMode mode, NoiseStream& rng) {
  const Vec3 marker = marker_position(state, plant_arm);
  const Vec2 noise_left(rng.gaussian(noise.pixel_sigma), rng.gaussian(noise.pixel_sigma));
  const Vec2 noise_right(rng.gaussian(noise.pixel_sigma), rng.gaussian(noise.pixel_sigma));
  const Vec3 noise_3d(rng.gaussian(noise.visual3d_sigma), rng.gaussian(noise.visual3d_sigma),
                      rng.gaussian(noise.visual3d_sigma));

  const Projection left = project(rig.left, head, state.q_head, marker);
  MarkerObservation obs;
  obs.pixel_left = left.pixel + noise_left;
  if (mode == VisualMode::pixel2d) {
    obs.s_v = obs.pixel_left;
    obs.valid = left.valid;
    return obs;
  }
  const Projection right = project(rig.right, head, state.q_head, marker);
  obs.pixel_right = right.pixel + noise_right;
  obs.valid = left.valid && right.valid;
  obs.s_v = Vec3::Zero();
  if (obs.valid) {
    try {
      obs.s_v = triangulate(rig, head, state.q_head, obs.pixel_left, obs.pixel_right) + noise_3d;
    } catch (const IllConditionedError&) {
      obs.valid = false;
    }
  }
  return obs;
}

TargetSchedule::TargetSchedule(std::vector<Waypoint> waypoints, Interpolation mode, TargetSpace space)
    : waypoints_(std::move(waypoints)), mode_(mode), space_(space) {
  if (waypoints_.empty()) throw ConfigError("target schedule: at least one waypoint is required");
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    if (waypoints_[i].time < waypoints_[i - 1].time) {
      throw ConfigError("target schedule: waypoint times must be non-decreasing");
    }
  }
  for (const auto& w : waypoints_) {
    if (!w.position.allFinite() || !std::isfinite(w.time)) throw ConfigError("target schedule: non-finite waypoint");
  }
}

TargetSchedule TargetSchedule::constant(const Vec3& p, TargetSpace space) {
  return {{Waypoint{0.0, p}}, Interpolation::hold, space};
}

Vec3 TargetSchedule::current_target(double time) const {
  if (time <= waypoints_.front().time) return waypoints_.front().position;
  if (time >= waypoints_.back().time) return waypoints_.back().position;
  // First waypoint strictly after `time`.
  const auto next = std::upper_bound(waypoints_.begin(), waypoints_.end(), time,
                                     [](double t, const Waypoint& w) { return t < w.time; });
  const auto prev = std::prev(next);
  if (mode_ == Interpolation::hold) return prev->position;
  const double span = next->time - prev->time;
  if (span <= 0.0) return next->position;
  const double s = (time - prev->time) / span;
  return prev->position + s * (next->position - prev->position);
}

double TargetSchedule::end_time() const { return waypoints_.back().time; }

std::vector<Vec3> prism_vertices(const Vec3& center, const Vec3& size) {
  const Vec3 h = 0.5 * size;
  const std::vector<Vec3> unit = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                  {-1, 1, 1},   {1, 1, 1},   {1, -1, 1}, {-1, -1, 1}};
  std::vector<Vec3> out;
  out.reserve(unit.size());
  for (const auto& u : unit) out.emplace_back(center + u.cwiseProduct(h));
  return out;
}

TargetSchedule prism_schedule(const Vec3& center, const Vec3& size, double dwell) {
  std::vector<Waypoint> wps;
  const auto verts = prism_vertices(center, size);
  for (std::size_t i = 0; i < verts.size(); ++i) wps.push_back({static_cast<double>(i) * dwell, verts[i]});
  return {wps, Interpolation::hold, TargetSpace::world};
}

Plant::Plant(KinematicChain arm_nominal, KinematicChain head, CameraRig rig, NoiseSpec noise, MismatchSpec mismatch,
             PlantState initial)
    : true_arm_(mismatch.link_scale.size() == arm_nominal.dof() ? arm_nominal.with_scaled_links(mismatch.link_scale)
                                                                  : arm_nominal),
      head_(std::move(head)),
      rig_(std::move(rig)),
      noise_(noise),
      mismatch_(std::move(mismatch)),
      state_(std::move(initial)),
      rng_(noise.seed) {
  noise_.validate();
  mismatch_.validate(true_arm_.dof());
  rig_.validate();
  true_arm_.check_dimension(state_.q_arm, "plant arm state");
  head_.check_dimension(state_.q_head, "plant head state");
  state_.q_arm = true_arm_.clamp_to_limits(state_.q_arm);
  state_.q_head = head_.clamp_to_limits(state_.q_head);
}

void Plant::set_noise(const NoiseSpec& noise) {
  noise.validate();
  // The stream keeps running; only magnitudes change.
  const auto seed = noise_.seed;
  noise_ = noise;
  noise_.seed = seed;
}

void Plant::step(const Vec& a_arm, const Vec& a_head, double dt) {
  state_ = step_plant(state_, true_arm_, head_, a_arm, a_head, dt);
}

Plant::Reading Plant::sense(VisualMode mode) {
  Reading r;
  r.s_p = read_encoders(state_, noise_, mismatch_, rng_);
  r.s_e = read_head_encoders(state_, noise_, rng_);
  r.marker = observe_marker(state_, true_arm_, head_, rig_, noise_, mode, rng_);
  return r;
}

}  // namespace aif

#pragma once

#include "aif/engine.hpp"
#include "aif/kinematics.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace aif {

struct NoiseSpec {
  double encoder_sigma = 0.0;       // rad, arm encoders
  double head_encoder_sigma = 0.0;  // rad
  double pixel_sigma = 0.0;         // px, per image coordinate
  double visual3d_sigma = 0.0;      // m, added after triangulation
  std::uint64_t seed = 1;

  void validate() const;
};

/// Plant-vs-model discrepancy: link lengths of the true arm are scaled and the
/// arm encoders read with a constant offset.
struct MismatchSpec {
  Vec link_scale;      // one factor per arm link, empty = no scaling
  Vec encoder_offset;  // rad per arm joint, empty = none

  void validate(int n_arm) const;
};

struct PlantState {
  Vec q_arm;
  Vec q_head;
  /// Displacement of the visual marker from the true end effector, world frame.
  Vec3 marker_offset = Vec3::Zero();
  double time = 0.0;
};

/// q <- clamp(q + clamp(a) dt) for both chains; time advances by dt.
PlantState step_plant(const PlantState& state, const KinematicChain& arm, const KinematicChain& head,
                      const Vec& a_arm, const Vec& a_head, double dt);

/// Single seeded Gaussian stream shared by every sensor draw of one plant.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
  double gaussian(double sigma);
  Vec gaussian(Eigen::Index n, double sigma);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Vec read_encoders(const PlantState& state, const NoiseSpec& noise, const MismatchSpec& mismatch, NoiseStream& rng);
Vec read_head_encoders(const PlantState& state, const NoiseSpec& noise, NoiseStream& rng);

struct MarkerObservation {
  Vec s_v;
  bool valid = false;
  Vec2 pixel_left = Vec2::Zero();
  Vec2 pixel_right = Vec2::Zero();
};

/// World position of the visual marker on the true arm.
Vec3 marker_position(const PlantState& state, const KinematicChain& plant_arm);

/// Noisy view of the marker. pixel2d: left-camera pixel; stereo3d: triangulated
/// position from both noisy projections. Out of view in a used camera -> invalid.
/// Always consumes the same number of draws from rng so streams stay aligned.
MarkerObservation observe_marker(const PlantState& state, const KinematicChain& plant_arm,
                                 const KinematicChain& head, const CameraRig& rig, const NoiseSpec& noise,
                                 VisualMode mode, NoiseStream& rng);

enum class TargetSpace { world, pixel };
enum class Interpolation { linear, hold };

struct Waypoint {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
};

/// Time-indexed target path. linear: piecewise-linear between waypoints;
/// hold: each waypoint held until the next one. Constant outside the range.
class TargetSchedule {
 public:
  TargetSchedule() = default;
  TargetSchedule(std::vector<Waypoint> waypoints, Interpolation mode, TargetSpace space);

  static TargetSchedule constant(const Vec3& p, TargetSpace space);

  Vec3 current_target(double time) const;
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  Interpolation interpolation() const { return mode_; }
  TargetSpace space() const { return space_; }
  double end_time() const;

 private:
  std::vector<Waypoint> waypoints_{Waypoint{}};
  Interpolation mode_ = Interpolation::linear;
  TargetSpace space_ = TargetSpace::world;
};

/// Eight corners of an axis-aligned box, visited in a closed tour (bottom face, then top face).
std::vector<Vec3> prism_vertices(const Vec3& center, const Vec3& size);

/// Hold schedule visiting the prism vertices, each for `dwell` seconds starting at t = 0.
TargetSchedule prism_schedule(const Vec3& center, const Vec3& size, double dwell);

/// The simulated robot: true kinematics, cameras, noise stream and state.
class Plant {
 public:
  Plant(KinematicChain arm_nominal, KinematicChain head, CameraRig rig, NoiseSpec noise, MismatchSpec mismatch,
        PlantState initial);

  const PlantState& state() const { return state_; }
  PlantState& mutable_state() { return state_; }
  const KinematicChain& true_arm() const { return true_arm_; }
  const KinematicChain& head() const { return head_; }
  const CameraRig& rig() const { return rig_; }
  const NoiseSpec& noise() const { return noise_; }
  const MismatchSpec& mismatch() const { return mismatch_; }
  void set_noise(const NoiseSpec& noise);

  void step(const Vec& a_arm, const Vec& a_head, double dt);

  struct Reading {
    Vec s_p;
    Vec s_e;
    MarkerObservation marker;
  };
  /// Draws one synchronized sensor reading (fixed draw order: arm, head, cameras).
  Reading sense(VisualMode mode);

  Vec3 marker_world() const { return marker_position(state_, true_arm_); }

 private:
  KinematicChain true_arm_;
  KinematicChain head_;
  CameraRig rig_;
  NoiseSpec noise_;
  MismatchSpec mismatch_;
  PlantState state_;
  NoiseStream rng_;
};

}  // namespace aif

#pragma once

#include "aif/engine.hpp"
#include "aif/kinematics.hpp"
#include "aif/plant.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aif {

/// Built-in robot description (arm, head, cameras) used for any block a scenario omits.
const nlohmann::json& default_robot_json();

KinematicChain parse_chain(const nlohmann::json& j);
CameraRig parse_rig(const nlohmann::json& j);

KinematicChain default_arm_chain();
KinematicChain default_head_chain();
CameraRig default_rig();

enum class Experiment { trial, reaching_2d, noise_sweep, adaptation, comparison, moving_target };

const char* to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

enum class ReachUnits { px, m };

struct ReachCriterion {
  double radius = 5.0;
  ReachUnits units = ReachUnits::px;
  /// The error must stay inside the radius this long for the target to count as reached.
  double dwell = 0.0;
};

struct MarkerPreset {
  std::string name;
  /// Fixed world-frame offset; ignored when toward_elbow > 0.
  Vec3 offset = Vec3::Zero();
  /// If positive, the offset is this many metres from the hand toward the elbow.
  double toward_elbow = 0.0;
};

struct AdaptationConfig {
  double settle_time = 8.0;
  double observe_time = 8.0;
  std::vector<MarkerPreset> presets;
};

struct ComparisonConfig {
  Vec3 prism_center = Vec3(0.33, -0.10, 0.38);
  Vec3 prism_size = Vec3(0.10, 0.10, 0.10);
  double dwell = 4.0;  // s per vertex, both controllers
  double ik_move_fraction = 0.5;
  double error_window = 0.5;  // s at the end of each vertex used for the RMS error
};

struct ParameterGrid {
  std::vector<double> action_gain;
  std::vector<double> attractor_gain;
  std::vector<double> sigma_smu;
};

/// Complete, validated description of one experiment.
struct ScenarioConfig {
  std::string name = "scenario";
  Experiment experiment = Experiment::trial;
  std::uint64_t seed = 1;
  int trials = 1;
  double dt = 0.01;
  long max_steps = 2000;

  KinematicChain arm = default_arm_chain();
  Vec arm_initial;
  Vec arm_active;
  KinematicChain head = default_head_chain();
  Vec head_initial;
  CameraRig rig = default_rig();

  VisualMode visual_mode = VisualMode::stereo3d;
  bool head_tracking = false;

  Precisions arm_precisions;
  Precisions head_precisions;
  double attractor_gain = 1.0;
  double head_attractor_gain = 1.0;
  double dynamics_cap_factor = 2.0;

  NoiseSpec noise;
  MismatchSpec mismatch;
  TargetSchedule targets;
  ReachCriterion reach;
  bool stop_on_reach = false;
  double initial_jitter = 0.0;  // rad, uniform per active joint, seeded per trial

  std::vector<double> noise_levels;  // rad
  AdaptationConfig adaptation;
  ComparisonConfig comparison;
  ParameterGrid sweep;

  nlohmann::json source;

  void validate() const;
};

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace aif

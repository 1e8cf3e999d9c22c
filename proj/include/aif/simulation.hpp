#pragma once

#include "aif/engine.hpp"
#include "aif/plant.hpp"
#include "aif/scenario.hpp"
#include "aif/trace.hpp"

#include <optional>

namespace aif {

/// Everything observed and decided in one control cycle.
struct CycleRecord {
  TraceRow arm;
  TraceRow head;  // q/s_p/mu/mu_prime/a of the head; s_v holds the target pixel
  double head_free_energy = 0.0;
  Vec3 marker_world = Vec3::Zero();
  /// Noiseless distance between marker and target in the reach units.
  double visual_error = 0.0;
  Vec2 marker_pixel = Vec2::Zero();
  bool marker_in_view = false;
  Vec2 target_pixel = Vec2::Zero();
  bool target_in_view = false;
};

/// One closed loop: a plant plus the arm engine and, optionally, the head engine.
/// Each step() reads the sensors at the current plant time, updates the beliefs
/// and actions, then advances the plant by dt with the new actions.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, std::uint64_t seed);
  Simulation(const ScenarioConfig& cfg, std::uint64_t seed, const Vec& arm_initial);

  CycleRecord step();

  const ScenarioConfig& config() const { return cfg_; }
  const Plant& plant() const { return plant_; }
  Plant& plant() { return plant_; }
  const GenerativeModel& arm_model() const { return arm_model_; }
  const HeadModel& head_model() const { return head_model_; }
  const BeliefState& arm_belief() const { return arm_belief_; }
  const BeliefState& head_belief() const { return head_belief_; }
  double time() const { return plant_.state().time; }

  Precisions& arm_precisions() { return arm_prec_; }
  const Precisions& arm_precisions() const { return arm_prec_; }
  Precisions& head_precisions() { return head_prec_; }
  double& attractor_gain() { return attractor_gain_; }

  void set_schedule(TargetSchedule schedule) { schedule_ = std::move(schedule); }
  const TargetSchedule& schedule() const { return schedule_; }
  /// Fixed world/pixel target overriding the schedule until cleared.
  void set_target_override(std::optional<Vec3> target) { target_override_ = target; }
  Vec3 current_target() const;
  void set_marker_offset(const Vec3& offset) { plant_.mutable_state().marker_offset = offset; }

  /// Noiseless reach error of the current plant state.
  double reach_error() const;

  TraceLayout arm_layout() const { return {arm_model_.n_p(), arm_model_.n_v()}; }
  TraceLayout head_layout() const { return {head_model_.n_p(), 2}; }

 private:
  ScenarioConfig cfg_;
  GenerativeModel arm_model_;
  HeadModel head_model_;
  Precisions arm_prec_;
  Precisions head_prec_;
  double attractor_gain_;
  Plant plant_;
  BeliefState arm_belief_;
  BeliefState head_belief_;
  TargetSchedule schedule_;
  std::optional<Vec3> target_override_;
};

}  // namespace aif

#pragma once

#include "aif/kinematics.hpp"
#include "aif/plant.hpp"
#include "aif/trace.hpp"

#include <vector>

namespace aif {

struct IkOptions {
  double damping = 0.05;  // lambda of the damped least-squares step
  double tolerance = 1e-5;  // m
  int max_iterations = 500;
};

struct IkSolution {
  Vec q_goal;
  double residual = 0.0;  // m
  int iterations = 0;
  bool converged = false;
};

/// Position-only damped least-squares IK: q <- q + J^T (J J^T + lambda^2 I)^-1 (target - FK(q)),
/// projected onto the joint limits every iteration. Returns the best iterate seen.
IkSolution solve_ik(const KinematicChain& chain, const Vec3& target, const Vec& q_start, const IkOptions& options = {});

/// Linear joint-space reference from q_start to q_goal over `duration`, held afterwards.
struct JointTrajectory {
  Vec q_start;
  Vec q_goal;
  double t0 = 0.0;
  double duration = 1.0;

  Vec reference(double time) const;
};

/// Open-loop position control of the plant's arm along a linear joint-space path
/// from its current encoder reading to q_goal, taking `duration` seconds and
/// then holding q_goal until `duration + hold` has elapsed. The joint
/// controller servoes the offset-affected encoder value; noisy readings are
/// drawn every cycle (and logged) but never fed back. The head is not moved.
std::vector<TraceRow> execute_position_trajectory(Plant& plant, const Vec& q_goal, double duration, double hold,
                                                  double dt, VisualMode mode, const Vec3& target);

}  // namespace aif

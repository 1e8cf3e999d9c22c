#include "aif/ik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aif {

IkSolution solve_ik(const KinematicChain& chain, const Vec3& target, const Vec& q_start, const IkOptions& options) {
  chain.check_dimension(q_start, "solve_ik");
  if (!target.allFinite()) throw ConfigError("solve_ik: target must be finite");

  Vec q = chain.clamp_to_limits(q_start);
  IkSolution best{q, (target - forward_kinematics(chain, q)).norm(), 0, false};
  if (best.residual < options.tolerance) {
    best.converged = true;
    return best;
  }
  const double lambda2 = options.damping * options.damping;
  double residual = best.residual;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Vec3 err = target - forward_kinematics(chain, q);
    const Mat jac = geometric_jacobian(chain, q);
    const Mat3 jjt = jac * jac.transpose() + lambda2 * Mat3::Identity();
    const Vec dq = jac.transpose() * jjt.ldlt().solve(err);
    // full steps can cycle when the target is out of reach; halve until the residual drops
    bool improved = false;
    for (double scale = 1.0; scale > 1e-6 && !improved; scale *= 0.5) {
      const Vec trial = chain.clamp_to_limits(q + scale * dq);
      const double r = (target - forward_kinematics(chain, trial)).norm();
      if (r < residual) {
        q = trial;
        residual = r;
        improved = true;
      }
    }
    best.iterations = it;
    if (!improved) break;
    best.q_goal = q;
    best.residual = residual;
    if (residual < options.tolerance) {
      best.converged = true;
      break;
    }
  }
  return best;
}

Vec JointTrajectory::reference(double time) const {
  if (duration <= 0.0) return q_goal;
  const double s = std::clamp((time - t0) / duration, 0.0, 1.0);
  return q_start + s * (q_goal - q_start);
}

std::vector<TraceRow> execute_position_trajectory(Plant& plant, const Vec& q_goal, double duration, double hold,
                                                  double dt, VisualMode mode, const Vec3& target) {
  const KinematicChain& arm = plant.true_arm();
  arm.check_dimension(q_goal, "execute_position_trajectory");
  if (!(dt > 0.0)) throw ConfigError("execute_position_trajectory: dt must be positive");

  const Vec& offset = plant.mismatch().encoder_offset;
  auto servo_reading = [&] {
    Vec q = plant.state().q_arm;
    if (offset.size() == q.size()) q += offset;
    return q;
  };
  const JointTrajectory path{servo_reading(), q_goal, plant.state().time, duration};
  const auto steps = static_cast<long>(std::llround((duration + hold) / dt));
  const Vec head_still = Vec::Zero(plant.head().dof());

  std::vector<TraceRow> rows;
  rows.reserve(static_cast<std::size_t>(std::max(steps, 0L)));
  for (long k = 0; k < steps; ++k) {
    const double t = plant.state().time;
    const Plant::Reading reading = plant.sense(mode);
    const Vec ref_next = path.reference(t + dt);
    const Vec command = arm.clamp_velocity((ref_next - servo_reading()) / dt);

    TraceRow row;
    row.time = t;
    row.q = plant.state().q_arm;
    row.s_p = reading.s_p;
    row.s_v = reading.marker.s_v;
    row.s_v_valid = reading.marker.valid;
    row.mu = path.reference(t);
    row.mu_prime = (ref_next - row.mu) / dt;
    row.action = command;
    row.free_energy = std::numeric_limits<double>::quiet_NaN();
    row.target = target;
    rows.push_back(std::move(row));

    plant.step(command, head_still, dt);
  }
  return rows;
}

}  // namespace aif

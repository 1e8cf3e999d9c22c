#include "aif/ik.hpp"
#include "aif/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace aif;

namespace {

Vec home_q() { return Eigen::Vector4d(0, deg2rad(30), deg2rad(-15), 0); }
Vec head_home() { return Vec3(deg2rad(40), deg2rad(-15), 0); }

// Both elbow solutions of the planar two-link problem.
std::array<Vec2, 2> two_link_ik(double l1, double l2, const Vec2& p) {
  const double c2 = (p.squaredNorm() - l1 * l1 - l2 * l2) / (2 * l1 * l2);
  std::array<Vec2, 2> out;
  for (int s = 0; s < 2; ++s) {
    const double q2 = (s == 0 ? 1 : -1) * std::acos(std::clamp(c2, -1.0, 1.0));
    const double q1 = std::atan2(p.y(), p.x()) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
    out[static_cast<std::size_t>(s)] = Vec2(q1, q2);
  }
  return out;
}

double wrapped_distance(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) d = std::max(d, std::abs(std::remainder(a(i) - b(i), 2 * kPi)));
  return d;
}

Plant plant_with(const MismatchSpec& m) {
  return Plant(default_arm_chain(), default_head_chain(), default_rig(), NoiseSpec{}, m,
               PlantState{home_q(), head_home(), Vec3::Zero(), 0.0});
}

}  // namespace

TEST_CASE("target at the start pose needs no iterations") {
  const KinematicChain arm = default_arm_chain();
  const IkSolution s = solve_ik(arm, forward_kinematics(arm, home_q()), home_q());
  CHECK(s.converged);
  CHECK(s.iterations == 0);
  CHECK(s.q_goal == home_q());
}

TEST_CASE("planar two link matches the closed form") {
  const double l1 = 0.3, l2 = 0.2;
  const KinematicChain c = test::planar_chain({l1, l2});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> r(0.15, 0.45), th(-1.5, 1.5);
  for (int k = 0; k < 100; ++k) {
    const double rad = r(rng), ang = th(rng);
    const Vec2 p(rad * std::cos(ang), rad * std::sin(ang));
    const IkSolution s = solve_ik(c, Vec3(p.x(), p.y(), 0), Vec2(ang, 0.5));
    CAPTURE(p.transpose());
    CHECK(s.converged);
    CHECK(s.residual < 1e-5);
    const auto closed = two_link_ik(l1, l2, p);
    CHECK(std::min(wrapped_distance(s.q_goal, closed[0]), wrapped_distance(s.q_goal, closed[1])) < 1e-3);
  }
}

TEST_CASE("unreachable target reports the distance to the workspace") {
  const KinematicChain c = test::planar_chain({0.3, 0.2});
  const IkSolution s = solve_ik(c, Vec3(0.8, 0.0, 0.0), Vec2(0.2, 0.3));
  CHECK_FALSE(s.converged);
  CHECK(s.residual == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(s.iterations > 0);
}

TEST_CASE("joint limits hold during the solve") {
  const KinematicChain arm = default_arm_chain();
  const IkSolution s = solve_ik(arm, Vec3(2, 2, 2), home_q());
  CHECK((s.q_goal - arm.clamp_to_limits(s.q_goal)).norm() == 0.0);
}

TEST_CASE("joint trajectory reference") {
  const JointTrajectory t{Vec2(0.0, 1.0), Vec2(1.0, -1.0), 2.0, 4.0};
  CHECK(t.reference(0.0) == Vec2(0.0, 1.0));
  CHECK((t.reference(4.0) - Vec2(0.5, 0.0)).norm() < 1e-15);
  CHECK(t.reference(10.0) == Vec2(1.0, -1.0));
}

TEST_CASE("position trajectory execution") {
  const Vec3 target = forward_kinematics(default_arm_chain(), home_q());
  SUBCASE("goal at the current pose is stationary") {
    Plant p = plant_with({});
    const auto rows = execute_position_trajectory(p, home_q(), 1.0, 0.5, 0.01, VisualMode::stereo3d, target);
    REQUIRE(rows.size() == 150);
    for (const TraceRow& r : rows) CHECK((r.q - home_q()).norm() < 1e-12);
  }
  SUBCASE("halfway in time is halfway in joint space") {
    Plant p = plant_with({});
    const Vec goal = home_q() + Eigen::Vector4d(0.2, -0.1, 0.3, 0.1);
    const auto rows = execute_position_trajectory(p, goal, 1.0, 0.0, 0.01, VisualMode::stereo3d, target);
    const auto mid = std::find_if(rows.begin(), rows.end(), [](const TraceRow& r) { return r.time >= 0.5 - 1e-9; });
    REQUIRE(mid != rows.end());
    CHECK((mid->q - 0.5 * (home_q() + goal)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((p.state().q_arm - goal).norm() < 1e-9);
  }
  SUBCASE("open loop error grows with the mismatch") {
    const KinematicChain arm = default_arm_chain();
    const Vec3 goal_point = forward_kinematics(arm, home_q()) + Vec3(0.05, 0.03, -0.04);
    const IkSolution s = solve_ik(arm, goal_point, home_q());
    REQUIRE(s.converged);
    double previous = -1.0;
    for (double scale : {1.0, 1.02, 1.05, 1.1}) {
      MismatchSpec m;
      m.link_scale = Eigen::Vector4d(1, 1, scale, scale);
      Plant p = plant_with(m);
      execute_position_trajectory(p, s.q_goal, 1.0, 0.5, 0.01, VisualMode::stereo3d, goal_point);
      const double err = (p.marker_world() - goal_point).norm();
      if (scale == 1.0) CHECK(err < 1e-5);
      CHECK(err > previous);
      previous = err;
    }
  }
}

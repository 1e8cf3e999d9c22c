#include "aif/plant.hpp"
#include "aif/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace aif;

namespace {

Vec home_q() { return Eigen::Vector4d(0, deg2rad(30), deg2rad(-15), 0); }
Vec head_home() { return Vec3(deg2rad(40), deg2rad(-15), 0); }

PlantState home_state() { return {home_q(), head_home(), Vec3::Zero(), 0.0}; }

Plant default_plant(const NoiseSpec& noise = {}, const MismatchSpec& mismatch = {}) {
  return Plant(default_arm_chain(), default_head_chain(), default_rig(), noise, mismatch, home_state());
}

}  // namespace

TEST_CASE("plant step") {
  const KinematicChain arm = default_arm_chain(), head = default_head_chain();
  SUBCASE("zero action leaves q unchanged") {
    const PlantState next = step_plant(home_state(), arm, head, Vec::Zero(4), Vec::Zero(3), 0.01);
    CHECK(next.q_arm == home_q());
    CHECK(next.q_head == head_home());
    CHECK(next.time == doctest::Approx(0.01));
  }
  SUBCASE("unit velocity on the first joint") {
    const KinematicChain fast = test::planar_chain({0.1, 0.1, 0.1, 0.1});
    PlantState s{Vec::Zero(4), Vec::Zero(3), Vec3::Zero(), 0.0};
    const PlantState next = step_plant(s, fast, head, Eigen::Vector4d(1, 0, 0, 0), Vec::Zero(3), 0.01);
    CHECK((next.q_arm - Eigen::Vector4d(0.01, 0, 0, 0)).norm() < 1e-15);
  }
  SUBCASE("repeated steps saturate at the joint limit") {
    PlantState s = home_state();
    const Vec a = Vec::Constant(4, 10.0);
    for (int k = 0; k < 2000; ++k) s = step_plant(s, arm, head, a, Vec::Zero(3), 0.01);
    CHECK(s.q_arm == arm.joint_upper());
  }
  SUBCASE("commanded velocity is clamped") {
    const PlantState next = step_plant(home_state(), arm, head, Vec::Constant(4, 100.0), Vec::Zero(3), 0.01);
    CHECK(((next.q_arm - home_q()) / 0.01 - arm.vel_limit()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("encoders") {
  NoiseStream rng(3);
  SUBCASE("noiseless reading is q") {
    CHECK(read_encoders(home_state(), NoiseSpec{}, MismatchSpec{}, rng) == home_q());
  }
  SUBCASE("offset is added") {
    MismatchSpec m;
    m.encoder_offset = Eigen::Vector4d(0.1, 0, -0.2, 0);
    CHECK((read_encoders(home_state(), NoiseSpec{}, m, rng) - home_q() - m.encoder_offset).norm() < 1e-15);
  }
  SUBCASE("sample deviation matches the configured sigma") {
    NoiseSpec n;
    n.encoder_sigma = deg2rad(10);
    const int draws = 100000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < draws / 4; ++k) {
      const Vec e = read_encoders(home_state(), n, MismatchSpec{}, rng) - home_q();
      sum += e.sum();
      sq += e.squaredNorm();
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(sq / draws - mean * mean);
    CHECK(std::abs(sd - n.encoder_sigma) < 0.02 * n.encoder_sigma);
  }
  SUBCASE("fixed seed gives identical sequences") {
    NoiseSpec n;
    n.encoder_sigma = 0.1;
    NoiseStream a(42), b(42);
    for (int k = 0; k < 100; ++k)
      CHECK(read_encoders(home_state(), n, MismatchSpec{}, a) == read_encoders(home_state(), n, MismatchSpec{}, b));
  }
}

TEST_CASE("marker observation") {
  const KinematicChain arm = default_arm_chain(), head = default_head_chain();
  const CameraRig rig = default_rig();
  NoiseStream rng(5);
  SUBCASE("noiseless stereo equals forward kinematics") {
    const MarkerObservation o = observe_marker(home_state(), arm, head, rig, NoiseSpec{}, VisualMode::stereo3d, rng);
    REQUIRE(o.valid);
    CHECK((o.s_v - forward_kinematics(arm, home_q())).norm() < 1e-9);
  }
  SUBCASE("marker offset shifts the observation") {
    PlantState s = home_state();
    s.marker_offset = Vec3(0.05, 0, 0);
    const MarkerObservation o = observe_marker(s, arm, head, rig, NoiseSpec{}, VisualMode::stereo3d, rng);
    REQUIRE(o.valid);
    CHECK((o.s_v - forward_kinematics(arm, home_q()) - Vec3(0.05, 0, 0)).norm() < 1e-9);
  }
  SUBCASE("pixel mode gives the left projection") {
    const MarkerObservation o = observe_marker(home_state(), arm, head, rig, NoiseSpec{}, VisualMode::pixel2d, rng);
    REQUIRE(o.valid);
    CHECK((o.s_v - project(rig.left, head, head_home(), forward_kinematics(arm, home_q())).pixel).norm() < 1e-12);
  }
  SUBCASE("marker outside the view is invalid") {
    PlantState s = home_state();
    s.marker_offset = Vec3(-3, 0, 0);
    CHECK_FALSE(observe_marker(s, arm, head, rig, NoiseSpec{}, VisualMode::stereo3d, rng).valid);
    CHECK_FALSE(observe_marker(s, arm, head, rig, NoiseSpec{}, VisualMode::pixel2d, rng).valid);
  }
  SUBCASE("pixel noise is depth dominant after triangulation") {
    NoiseSpec n;
    n.pixel_sigma = 1.0;
    const RigidTransform cam = camera_pose(head, head_home(), rig.left);
    const Vec3 p = forward_kinematics(arm, home_q());
    Vec3 var = Vec3::Zero();
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) {
      const MarkerObservation o = observe_marker(home_state(), arm, head, rig, n, VisualMode::stereo3d, rng);
      const Vec3 e = cam.rotation().transpose() * (o.s_v - p);
      var += e.cwiseAbs2();
    }
    CHECK(var.z() > 10.0 * var.x());
    CHECK(var.z() > 10.0 * var.y());
  }
}

TEST_CASE("noiseless plant agrees with the generative model at mu = q") {
  std::mt19937_64 rng(6);
  for (VisualMode mode : {VisualMode::stereo3d, VisualMode::pixel2d}) {
    const GenerativeModel model(default_arm_chain(), default_head_chain(), default_rig(), mode);
    Plant plant = default_plant();
    for (int k = 0; k < 50; ++k) {
      plant.mutable_state().q_arm = home_q() + test::random_vec(4, rng, 0.05);
      const Plant::Reading r = plant.sense(mode);
      REQUIRE(r.marker.valid);
      CHECK(r.s_p == plant.state().q_arm);
      CHECK(r.s_e == plant.state().q_head);
      CHECK((r.marker.s_v - predict_visual(model, r.s_p, r.s_e).value).norm() < 1e-9);
    }
  }
}

TEST_CASE("link scaling moves the true hand") {
  MismatchSpec m;
  m.link_scale = Eigen::Vector4d(1, 1, 1.1, 1.1);
  Plant plant = default_plant({}, m);
  const Vec3 nominal = forward_kinematics(default_arm_chain(), home_q());
  CHECK((plant.marker_world() - nominal).norm() > 1e-3);
  // the encoders still read the true angles
  CHECK(plant.sense(VisualMode::stereo3d).s_p == home_q());
}

TEST_CASE("same seed gives the same readings") {
  NoiseSpec n;
  n.encoder_sigma = 0.02;
  n.head_encoder_sigma = 0.01;
  n.pixel_sigma = 1.0;
  Plant a = default_plant(n), b = default_plant(n);
  for (int k = 0; k < 200; ++k) {
    const Plant::Reading ra = a.sense(VisualMode::stereo3d), rb = b.sense(VisualMode::stereo3d);
    CHECK(ra.s_p == rb.s_p);
    CHECK(ra.s_e == rb.s_e);
    CHECK(ra.marker.s_v == rb.marker.s_v);
    a.step(Vec::Constant(4, 0.1), Vec::Zero(3), 0.01);
    b.step(Vec::Constant(4, 0.1), Vec::Zero(3), 0.01);
  }
}

TEST_CASE("target schedule") {
  SUBCASE("single waypoint is constant") {
    const TargetSchedule s = TargetSchedule::constant(Vec3(1, 2, 3), TargetSpace::world);
    CHECK(s.current_target(0.0) == Vec3(1, 2, 3));
    CHECK(s.current_target(100.0) == Vec3(1, 2, 3));
  }
  SUBCASE("linear midpoint") {
    const TargetSchedule s({{0.0, Vec3(0, 0, 0)}, {2.0, Vec3(2, -4, 6)}}, Interpolation::linear, TargetSpace::world);
    CHECK((s.current_target(1.0) - Vec3(1, -2, 3)).norm() < 1e-15);
    CHECK(s.current_target(-1.0) == Vec3(0, 0, 0));
    CHECK(s.current_target(5.0) == Vec3(2, -4, 6));
    CHECK(s.end_time() == 2.0);
  }
  SUBCASE("hold keeps each waypoint") {
    const TargetSchedule s({{0.0, Vec3(0, 0, 0)}, {2.0, Vec3(2, 0, 0)}}, Interpolation::hold, TargetSpace::world);
    CHECK(s.current_target(1.999) == Vec3(0, 0, 0));
    CHECK(s.current_target(2.0) == Vec3(2, 0, 0));
  }
  SUBCASE("prism tour") {
    const Vec3 c(0.3, -0.1, 0.4), size(0.1, 0.2, 0.3);
    const std::vector<Vec3> v = prism_vertices(c, size);
    REQUIRE(v.size() == 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(((v[i] - c).cwiseAbs() - size / 2).norm() < 1e-15);
      for (std::size_t j = i + 1; j < v.size(); ++j) CHECK((v[i] - v[j]).norm() > 0.05);
    }
    const TargetSchedule s = prism_schedule(c, size, 4.0);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(s.current_target(4.0 * i + 1.0) == v[i]);
  }
}

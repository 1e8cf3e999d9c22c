#pragma once

// Shared fixtures for the unit tests: planar chains, an overhead camera that
// sees the planar workspace, random configurations.

#include "aif/engine.hpp"
#include "aif/kinematics.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace test {

inline aif::KinematicChain planar_chain(const std::vector<double>& lengths, double vel = 2.0) {
  std::vector<aif::DhLink> links;
  for (double l : lengths) links.push_back({l, 0.0, 0.0, 0.0});
  const auto n = static_cast<Eigen::Index>(lengths.size());
  return aif::KinematicChain(links, aif::Vec::Constant(n, -3.0), aif::Vec::Constant(n, 3.0),
                             aif::Vec::Constant(n, vel));
}

/// One locked joint; the camera sits 0.6 m above (0.25, 0, 0) looking straight down.
inline aif::KinematicChain overhead_head() {
  return aif::KinematicChain({aif::DhLink{}}, aif::Vec::Constant(1, -1.0), aif::Vec::Constant(1, 1.0),
                             aif::Vec::Constant(1, 1.0),
                             aif::RigidTransform::from_rpy(aif::Vec3(0.25, 0.0, 0.6), aif::kPi, 0.0, 0.0));
}

inline aif::CameraRig overhead_rig() {
  aif::CameraRig rig;
  rig.right.mount = aif::RigidTransform(aif::Mat3::Identity(), aif::Vec3(0.06, 0.0, 0.0));
  return rig;
}

inline aif::GenerativeModel planar_model(aif::VisualMode mode, const std::vector<double>& lengths = {0.3, 0.2}) {
  return aif::GenerativeModel(planar_chain(lengths), overhead_head(), overhead_rig(), mode);
}

inline aif::Vec random_q(const aif::KinematicChain& c, std::mt19937_64& rng) {
  aif::Vec q(c.dof());
  for (int i = 0; i < c.dof(); ++i) {
    std::uniform_real_distribution<double> u(c.joint_lower()(i), c.joint_upper()(i));
    q(i) = u(rng);
  }
  return q;
}

inline aif::Vec random_vec(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  aif::Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Largest entry-wise violation of the four Moore-Penrose conditions.
inline double moore_penrose_residual(const aif::Mat& m, const aif::Mat& p) {
  const double a = (m * p * m - m).cwiseAbs().maxCoeff();
  const double b = (p * m * p - p).cwiseAbs().maxCoeff();
  const aif::Mat mp = m * p, pm = p * m;
  const double c = (mp - mp.transpose()).cwiseAbs().maxCoeff();
  const double d = (pm - pm.transpose()).cwiseAbs().maxCoeff();
  return std::max({a, b, c, d});
}

/// As above, each condition scaled by the size of the matrix it should reproduce.
inline double moore_penrose_relative_residual(const aif::Mat& m, const aif::Mat& p) {
  auto rel = [](const aif::Mat& err, const aif::Mat& ref) {
    const double scale = ref.cwiseAbs().maxCoeff();
    return scale > 0.0 ? err.cwiseAbs().maxCoeff() / scale : err.cwiseAbs().maxCoeff();
  };
  const aif::Mat mp = m * p, pm = p * m;
  return std::max({rel(m * p * m - m, m), rel(p * m * p - p, p), rel(mp - mp.transpose(), mp),
                   rel(pm - pm.transpose(), pm)});
}


/// Random belief, sensors and attractor around the default arm's home pose.
struct EngineState {
  aif::BeliefState belief;
  aif::SensorFrame sensors;
  aif::Attractor rho;
  aif::Precisions prec;
};

inline EngineState random_engine_state(const aif::GenerativeModel& model, const aif::Vec& head_q, const aif::Vec& home,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const bool pixel = model.visual_mode == aif::VisualMode::pixel2d;
  EngineState s;
  aif::Vec mu = home;
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) += u(rng);
  s.belief = aif::BeliefState::at(mu);
  s.belief.mu_prime = random_vec(mu.size(), rng, 0.2);
  s.belief.action = random_vec(mu.size(), rng, 0.1);
  s.sensors.s_p = mu + random_vec(mu.size(), rng, 0.05);
  const aif::VisualPrediction g = aif::predict_visual(model, mu, head_q);
  s.sensors.s_v = g.value + random_vec(model.n_v(), rng, pixel ? 10.0 : 0.01);
  s.sensors.s_v_valid = true;
  s.sensors.head_q = head_q;
  s.rho.gain = 0.5 + 0.5 * (u(rng) + 0.3);
  if (pixel) {
    std::uniform_real_distribution<double> px(40.0, 280.0), py(30.0, 210.0);
    s.rho.target = aif::Vec3(px(rng), py(rng), 0.0);
  } else {
    s.rho.target = g.value + random_vec(3, rng, 0.05);
  }
  s.prec.sigma_sp = 1.0;
  s.prec.sigma_sv = pixel ? 100.0 : 0.01;
  s.prec.sigma_smu = 0.5;
  s.prec.action_gain = 10.0;
  return s;
}

/// Central differences of free_energy w.r.t. mu (which = 0) or mu' (which = 1), negated.
inline aif::Vec numeric_neg_gradient(const aif::GenerativeModel& model, const EngineState& s, int which,
                                     double h = 1e-6) {
  const Eigen::Index n = s.belief.mu.size();
  aif::Vec out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    aif::BeliefState up = s.belief, down = s.belief;
    (which == 0 ? up.mu : up.mu_prime)(j) += h;
    (which == 0 ? down.mu : down.mu_prime)(j) -= h;
    out(j) = -(aif::free_energy(model, up, s.sensors, s.rho, s.prec) -
               aif::free_energy(model, down, s.sensors, s.rho, s.prec)) /
             (2 * h);
  }
  return out;
}

/// max |a - b| scaled by max(1, max |b|).
inline double scaled_error(const aif::Vec& a, const aif::Vec& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace test

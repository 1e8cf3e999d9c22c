#include "aif/engine.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace aif {

namespace {

constexpr double kFiniteDifferenceStep = 1e-6;

double inverse_variance(double sigma) { return std::isinf(sigma) ? 0.0 : 1.0 / sigma; }

double log_normalizer(double sigma, Eigen::Index dims) {
  if (std::isinf(sigma)) return 0.0;
  return 0.5 * static_cast<double>(dims) * std::log(2.0 * kPi * sigma);
}

void require_size(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << ": expected length " << n << ", got " << v.size();
    throw ConfigError(os.str());
  }
}

Vec cap_norm(const Vec& v, double cap) {
  const double norm = v.norm();
  if (norm > cap && norm > 0.0) return v * (cap / norm);
  return v;
}

std::string dump(const char* label, const Vec& v) {
  std::ostringstream os;
  os << label << "=[" << v.transpose() << "]";
  return os.str();
}

void check_finite(const BeliefState& updated, const BeliefState& previous, const char* who) {
  if (updated.mu.allFinite() && updated.mu_prime.allFinite() && updated.action.allFinite()) return;
  std::ostringstream os;
  os << who << ": non-finite state after update; previous " << dump("mu", previous.mu) << ' '
     << dump("mu_prime", previous.mu_prime) << ' ' << dump("action", previous.action) << "; updated "
     << dump("mu", updated.mu) << ' ' << dump("mu_prime", updated.mu_prime) << ' '
     << dump("action", updated.action);
  throw NumericError(os.str());
}

}  // namespace

const char* to_string(VisualMode mode) { return mode == VisualMode::pixel2d ? "pixel2d" : "stereo3d"; }

VisualMode visual_mode_from_string(const std::string& name) {
  if (name == "pixel2d") return VisualMode::pixel2d;
  if (name == "stereo3d") return VisualMode::stereo3d;
  throw ConfigError("unknown visual mode '" + name + "' (expected pixel2d or stereo3d)");
}

void Precisions::validate() const {
  if (!(sigma_sp > 0.0) || !(sigma_sv > 0.0) || !(sigma_smu > 0.0)) {
    throw ConfigError("precisions: variances must be positive");
  }
  if (std::isinf(sigma_smu)) throw ConfigError("precisions: sigma_smu must be finite");
  if (!(action_gain > 0.0) || !std::isfinite(action_gain)) throw ConfigError("precisions: action_gain must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("precisions: dt must be positive");
}

GenerativeModel::GenerativeModel(KinematicChain arm, KinematicChain head_chain, CameraRig cameras, VisualMode mode)
    : chain(std::move(arm)),
      head(std::move(head_chain)),
      rig(std::move(cameras)),
      visual_mode(mode),
      joint_active(Vec::Ones(chain.dof())) {}

BeliefState BeliefState::at(const Vec& mu) {
  return {mu, Vec::Zero(mu.size()), Vec::Zero(mu.size())};
}

VisualPrediction predict_visual(const GenerativeModel& model, const Vec& mu, const Vec& head_q) {
  const Vec3 hand = forward_kinematics(model.chain, mu);
  if (model.visual_mode == VisualMode::stereo3d) return {hand, true};
  const Projection p = project(model.rig.left, model.head, head_q, hand);
  // Off-image predictions are still well defined; only points behind the camera are not.
  return {p.pixel, p.depth > 1e-9};
}

Mat visual_jacobian(const GenerativeModel& model, const Vec& mu, const Vec& head_q, JacobianMethod method) {
  model.chain.check_dimension(mu, "visual_jacobian");
  if (method == JacobianMethod::central_difference) {
    Mat jac(model.n_v(), model.n_p());
    for (int j = 0; j < model.n_p(); ++j) {
      Vec up = mu;
      Vec down = mu;
      up[j] += kFiniteDifferenceStep;
      down[j] -= kFiniteDifferenceStep;
      const VisualPrediction gp = predict_visual(model, up, head_q);
      const VisualPrediction gm = predict_visual(model, down, head_q);
      if (!gp.valid || !gm.valid) throw IllConditionedError("visual_jacobian: prediction invalid near mu");
      jac.col(j) = (gp.value - gm.value) / (2.0 * kFiniteDifferenceStep);
    }
    return jac;
  }
  const Mat jg = geometric_jacobian(model.chain, mu);
  if (model.visual_mode == VisualMode::stereo3d) return jg;
  const RigidTransform cam = camera_pose(model.head, head_q, model.rig.left);
  const Vec3 pc = cam.inverse().apply(forward_kinematics(model.chain, mu));
  if (!(pc.z() > 1e-9)) throw IllConditionedError("visual_jacobian: hand is behind the camera");
  return projection_jacobian(model.rig.left, pc) * cam.rotation().transpose() * jg;
}

AttractorValue attractor_arm(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q) {
  if (rho.gain < 0.0) throw ConfigError("attractor: gain must be non-negative");
  const VisualPrediction g = predict_visual(model, mu, head_q);
  if (!g.valid) return {Vec::Zero(model.n_v()), false};
  return {rho.gain * (rho.target.head(model.n_v()) - g.value), true};
}

Vec dynamics_f(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q) {
  const AttractorValue att = attractor_arm(model, mu, rho, head_q);
  if (!att.valid || att.value.isZero(0.0)) return Vec::Zero(model.n_p());
  const Mat jac = visual_jacobian(model, mu, head_q) * model.joint_active.asDiagonal();
  const Vec f = pseudoinverse(jac) * att.value;
  return cap_norm(f, model.dynamics_cap_factor * model.chain.vel_limit().norm());
}

Mat dynamics_jacobian(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q) {
  const int n = model.n_p();
  Mat jac(n, n);
  for (int j = 0; j < n; ++j) {
    Vec up = mu;
    Vec down = mu;
    up[j] += kFiniteDifferenceStep;
    down[j] -= kFiniteDifferenceStep;
    jac.col(j) = (dynamics_f(model, up, rho, head_q) - dynamics_f(model, down, rho, head_q)) /
                 (2.0 * kFiniteDifferenceStep);
  }
  return jac;
}

FreeEnergyTerms free_energy_terms(const GenerativeModel& model, const BeliefState& belief,
                                  const SensorFrame& sensors, const Attractor& rho, const Precisions& prec) {
  const int n = model.n_p();
  require_size(belief.mu, n, "free_energy mu");
  require_size(belief.mu_prime, n, "free_energy mu_prime");
  require_size(sensors.s_p, n, "free_energy s_p");

  FreeEnergyTerms terms;
  terms.proprioceptive = 0.5 * inverse_variance(prec.sigma_sp) * (sensors.s_p - belief.mu).squaredNorm();
  terms.normalization += log_normalizer(prec.sigma_sp, n);

  if (sensors.s_v_valid) {
    require_size(sensors.s_v, model.n_v(), "free_energy s_v");
    const VisualPrediction g = predict_visual(model, belief.mu, sensors.head_q);
    if (g.valid) {
      terms.visual = 0.5 * inverse_variance(prec.sigma_sv) * (sensors.s_v - g.value).squaredNorm();
      terms.normalization += log_normalizer(prec.sigma_sv, model.n_v());
    }
  }

  const Vec f = dynamics_f(model, belief.mu, rho, sensors.head_q);
  terms.dynamics = 0.5 * inverse_variance(prec.sigma_smu) * (belief.mu_prime - f).squaredNorm();
  terms.normalization += log_normalizer(prec.sigma_smu, n);
  return terms;
}

double free_energy(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                   const Attractor& rho, const Precisions& prec) {
  return free_energy_terms(model, belief, sensors, rho, prec).total();
}

namespace {

/// Sensory prediction-error term shared by the mu and action gradients:
/// (1/Ssp)(s_p - mu) and (1/Ssv) J^T (s_v - g(mu)).
struct SensoryErrors {
  Vec proprio;
  Vec visual;
  Mat jac_v;
};

SensoryErrors sensory_errors(const GenerativeModel& model, const Vec& mu, const SensorFrame& sensors,
                             const Precisions& prec) {
  const int n = model.n_p();
  require_size(mu, n, "gradient mu");
  require_size(sensors.s_p, n, "gradient s_p");
  SensoryErrors out;
  out.proprio = inverse_variance(prec.sigma_sp) * (sensors.s_p - mu);
  out.visual = Vec::Zero(n);
  out.jac_v = Mat::Zero(model.n_v(), n);
  const double pv = inverse_variance(prec.sigma_sv);
  if (sensors.s_v_valid && pv > 0.0) {
    require_size(sensors.s_v, model.n_v(), "gradient s_v");
    const VisualPrediction g = predict_visual(model, mu, sensors.head_q);
    if (g.valid) {
      out.jac_v = visual_jacobian(model, mu, sensors.head_q);
      out.visual = pv * out.jac_v.transpose() * (sensors.s_v - g.value);
    }
  }
  return out;
}

}  // namespace

Vec grad_mu(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
            const Attractor& rho, const Precisions& prec) {
  const SensoryErrors e = sensory_errors(model, belief.mu, sensors, prec);
  require_size(belief.mu_prime, model.n_p(), "grad_mu mu_prime");
  const Vec f = dynamics_f(model, belief.mu, rho, sensors.head_q);
  const Mat df = dynamics_jacobian(model, belief.mu, rho, sensors.head_q);
  return e.proprio + e.visual + inverse_variance(prec.sigma_smu) * df.transpose() * (belief.mu_prime - f);
}

Vec grad_mu_prime(const GenerativeModel& model, const BeliefState& belief, const Attractor& rho,
                  const Precisions& prec, const Vec& head_q) {
  require_size(belief.mu_prime, model.n_p(), "grad_mu_prime mu_prime");
  return inverse_variance(prec.sigma_smu) * (dynamics_f(model, belief.mu, rho, head_q) - belief.mu_prime);
}

ActionSensitivity action_sensitivity(const GenerativeModel& model, const Vec& mu, const Vec& head_q,
                                     const Precisions& prec) {
  // q_{k+1} = q_k + a T with no coupling between joints; vision follows by the chain rule.
  return {prec.dt * Mat::Identity(model.n_p(), model.n_p()), prec.dt * visual_jacobian(model, mu, head_q)};
}

Vec grad_action(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                const Precisions& prec) {
  const SensoryErrors e = sensory_errors(model, belief.mu, sensors, prec);
  // ds_p/da = T I and ds_v/da = T J, so both terms reduce to T times the sensory errors.
  return -prec.dt * (e.proprio + e.visual);
}

BeliefState step(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                 const Attractor& rho, const Precisions& prec) {
  const int n = model.n_p();
  require_size(belief.action, n, "step action");
  const SensoryErrors e = sensory_errors(model, belief.mu, sensors, prec);
  require_size(belief.mu_prime, n, "step mu_prime");

  const Vec f = dynamics_f(model, belief.mu, rho, sensors.head_q);
  const Mat df = dynamics_jacobian(model, belief.mu, rho, sensors.head_q);
  const double p_mu = inverse_variance(prec.sigma_smu);
  const Vec g_mu = e.proprio + e.visual + p_mu * df.transpose() * (belief.mu_prime - f);
  const Vec g_mu_prime = p_mu * (f - belief.mu_prime);
  const Vec g_action = -prec.dt * (e.proprio + e.visual);

  const Vec& active = model.joint_active;
  BeliefState next;
  next.mu = belief.mu + prec.dt * active.cwiseProduct(belief.mu_prime + g_mu);
  next.mu_prime = belief.mu_prime + prec.dt * active.cwiseProduct(g_mu_prime);
  next.action = model.chain.clamp_velocity(
      active.cwiseProduct(belief.action + prec.dt * prec.action_gain * g_action));
  check_finite(next, belief, "step");
  return next;
}

Vec2 attractor_head(const HeadAttractor& rho, const PinholeCamera& camera) {
  if (rho.gain < 0.0) throw ConfigError("head attractor: gain must be non-negative");
  if (!rho.valid) return Vec2::Zero();
  return rho.gain * (Vec2(camera.cx, camera.cy) - rho.pixel);
}

Mat head_image_jacobian(const HeadModel& model, const Vec& mu_e, const Vec3& point_world) {
  const RigidTransform cam = camera_pose(model.head, mu_e, model.camera);
  const Vec3 pc = cam.inverse().apply(point_world);
  if (!(pc.z() > 1e-9)) throw IllConditionedError("head_image_jacobian: point is behind the camera");
  return projection_jacobian(model.camera, pc) *
         fixed_point_jacobian_in_moving_frame(model.head, mu_e, model.camera.mount, point_world);
}

Vec dynamics_f_head(const HeadModel& model, const Vec& mu_e, const HeadAttractor& rho) {
  model.head.check_dimension(mu_e, "dynamics_f_head");
  const Vec2 a_e = attractor_head(rho, model.camera);
  if (a_e.isZero(0.0)) return Vec::Zero(model.n_p());
  const RigidTransform cam = camera_pose(model.head, mu_e, model.camera);
  if (!(cam.inverse().apply(rho.point_world).z() > 1e-9)) return Vec::Zero(model.n_p());
  const Vec f = pseudoinverse(head_image_jacobian(model, mu_e, rho.point_world)) * a_e;
  return cap_norm(f, model.dynamics_cap_factor * model.head.vel_limit().norm());
}

namespace {

Mat dynamics_jacobian_head(const HeadModel& model, const Vec& mu_e, const HeadAttractor& rho) {
  const int n = model.n_p();
  Mat jac(n, n);
  for (int j = 0; j < n; ++j) {
    Vec up = mu_e;
    Vec down = mu_e;
    up[j] += kFiniteDifferenceStep;
    down[j] -= kFiniteDifferenceStep;
    jac.col(j) = (dynamics_f_head(model, up, rho) - dynamics_f_head(model, down, rho)) / (2.0 * kFiniteDifferenceStep);
  }
  return jac;
}

}  // namespace

double free_energy_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                        const HeadAttractor& rho, const Precisions& prec) {
  const int n = model.n_p();
  require_size(belief.mu, n, "free_energy_head mu");
  require_size(belief.mu_prime, n, "free_energy_head mu_prime");
  require_size(sensors.s_e, n, "free_energy_head s_e");
  const Vec f = dynamics_f_head(model, belief.mu, rho);
  return 0.5 * inverse_variance(prec.sigma_sp) * (sensors.s_e - belief.mu).squaredNorm() +
         0.5 * inverse_variance(prec.sigma_smu) * (belief.mu_prime - f).squaredNorm();
}

Vec grad_mu_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                 const HeadAttractor& rho, const Precisions& prec) {
  const int n = model.n_p();
  require_size(belief.mu, n, "grad_mu_head mu");
  require_size(sensors.s_e, n, "grad_mu_head s_e");
  const Vec f = dynamics_f_head(model, belief.mu, rho);
  const Mat df = dynamics_jacobian_head(model, belief.mu, rho);
  return inverse_variance(prec.sigma_sp) * (sensors.s_e - belief.mu) +
         inverse_variance(prec.sigma_smu) * df.transpose() * (belief.mu_prime - f);
}

Vec grad_mu_prime_head(const HeadModel& model, const BeliefState& belief, const HeadAttractor& rho,
                       const Precisions& prec) {
  return inverse_variance(prec.sigma_smu) * (dynamics_f_head(model, belief.mu, rho) - belief.mu_prime);
}

Vec grad_action_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                     const Precisions& prec) {
  require_size(sensors.s_e, model.n_p(), "grad_action_head s_e");
  return -prec.dt * inverse_variance(prec.sigma_sp) * (sensors.s_e - belief.mu);
}

BeliefState step_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                      const HeadAttractor& rho, const Precisions& prec) {
  require_size(belief.action, model.n_p(), "step_head action");
  const Vec g_mu = grad_mu_head(model, belief, sensors, rho, prec);
  const Vec g_mu_prime = grad_mu_prime_head(model, belief, rho, prec);
  const Vec g_action = grad_action_head(model, belief, sensors, prec);
  BeliefState next;
  next.mu = belief.mu + prec.dt * (belief.mu_prime + g_mu);
  next.mu_prime = belief.mu_prime + prec.dt * g_mu_prime;
  next.action = model.head.clamp_velocity(belief.action + prec.dt * prec.action_gain * g_action);
  check_finite(next, belief, "step_head");
  return next;
}

}  // namespace aif

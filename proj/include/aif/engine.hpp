#pragma once

#include "aif/kinematics.hpp"

#include <string>

namespace aif {

/// Raised when an update produces a non-finite value. what() carries a state dump.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VisualMode { pixel2d, stereo3d };

const char* to_string(VisualMode mode);
VisualMode visual_mode_from_string(const std::string& name);

/// Variances of the three likelihood terms plus action gain and control period.
/// An infinite variance switches the corresponding term off.
struct Precisions {
  double sigma_sp = 1.0;   // encoder variance, rad^2
  double sigma_sv = 1.0;   // visual variance, px^2 or m^2
  double sigma_smu = 5.0;  // dynamics variance
  double action_gain = 1.0;
  double dt = 0.01;

  void validate() const;
};

/// Causal variables: target location and attractor gain (arm mode), or
/// the tracked object's pixel location (head mode).
struct Attractor {
  Vec3 target = Vec3::Zero();    // metres in stereo3d, (u, v, unused) in pixel2d
  double gain = 0.2;
  Vec2 pixel_target = Vec2::Zero();
};

/// The arm's generative model: nominal kinematics and cameras used for predictions.
struct GenerativeModel {
  KinematicChain chain;
  KinematicChain head;
  CameraRig rig;
  VisualMode visual_mode = VisualMode::stereo3d;
  /// 1 for joints the controller may move, 0 for locked joints.
  Vec joint_active;
  /// Upper bound on |f| as a multiple of |vel_limit|.
  double dynamics_cap_factor = 2.0;

  GenerativeModel(KinematicChain arm, KinematicChain head_chain, CameraRig cameras, VisualMode mode);

  int n_p() const { return chain.dof(); }
  int n_v() const { return visual_mode == VisualMode::pixel2d ? 2 : 3; }
};

struct SensorFrame {
  Vec s_p;
  Vec s_v;
  bool s_v_valid = true;
  double timestamp = 0.0;
  /// Head configuration the cameras were at when s_v was captured.
  Vec head_q;
};

struct BeliefState {
  Vec mu;
  Vec mu_prime;
  Vec action;

  static BeliefState at(const Vec& mu);
};

struct VisualPrediction {
  Vec value;
  bool valid = true;
};

VisualPrediction predict_visual(const GenerativeModel& model, const Vec& mu, const Vec& head_q);

enum class JacobianMethod { analytic, central_difference };

/// d g_v / d mu, n_v x n_p.
Mat visual_jacobian(const GenerativeModel& model, const Vec& mu, const Vec& head_q,
                    JacobianMethod method = JacobianMethod::analytic);

struct AttractorValue {
  Vec value;
  bool valid = true;
};

/// gain * (target - g_v(mu)); zero and invalid when the prediction is out of view.
AttractorValue attractor_arm(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q);

/// f(mu, rho) = J+(mu) A(mu, rho), capped in norm.
Vec dynamics_f(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q);

/// d f / d mu by central differences, n_p x n_p.
Mat dynamics_jacobian(const GenerativeModel& model, const Vec& mu, const Attractor& rho, const Vec& head_q);

struct FreeEnergyTerms {
  double proprioceptive = 0.0;
  double visual = 0.0;
  double dynamics = 0.0;
  /// 1/2 sum ln(2 pi sigma) over every active residual dimension.
  double normalization = 0.0;

  double total() const { return proprioceptive + visual + dynamics; }
  double total_with_constants() const { return total() + normalization; }
};

FreeEnergyTerms free_energy_terms(const GenerativeModel& model, const BeliefState& belief,
                                  const SensorFrame& sensors, const Attractor& rho, const Precisions& prec);

/// Laplace-encoded energy without the constant log-variance terms.
double free_energy(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                   const Attractor& rho, const Precisions& prec);

/// -dF/dmu.
Vec grad_mu(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
            const Attractor& rho, const Precisions& prec);

/// -dF/dmu'.
Vec grad_mu_prime(const GenerativeModel& model, const BeliefState& belief, const Attractor& rho,
                  const Precisions& prec, const Vec& head_q);

struct ActionSensitivity {
  Mat ds_p_da;
  Mat ds_v_da;
};

ActionSensitivity action_sensitivity(const GenerativeModel& model, const Vec& mu, const Vec& head_q,
                                     const Precisions& prec);

/// -dF/da.
Vec grad_action(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                const Precisions& prec);

/// One Euler step of mu, mu' and a. Throws NumericError on non-finite results.
BeliefState step(const GenerativeModel& model, const BeliefState& belief, const SensorFrame& sensors,
                 const Attractor& rho, const Precisions& prec);

// Head object tracking. The head has proprioception only; the goal is to bring
// the tracked object's left-eye pixel to the principal point.

struct HeadModel {
  KinematicChain head;
  PinholeCamera camera;
  double dynamics_cap_factor = 2.0;

  int n_p() const { return head.dof(); }
};

struct HeadAttractor {
  /// Measured pixel of the object in the left image (rho5, rho6).
  Vec2 pixel = Vec2::Zero();
  /// Object position used to evaluate the image Jacobian.
  Vec3 point_world = Vec3::Zero();
  double gain = 0.2;
  bool valid = true;
};

struct HeadSensorFrame {
  Vec s_e;
  double timestamp = 0.0;
};

/// gain * ((c_x, c_y) - (rho5, rho6)).
Vec2 attractor_head(const HeadAttractor& rho, const PinholeCamera& camera);

/// d(pixel of the tracked point)/d(head joints), 2 x n_e.
Mat head_image_jacobian(const HeadModel& model, const Vec& mu_e, const Vec3& point_world);

/// f_e = J_v+(mu_e) A_e.
Vec dynamics_f_head(const HeadModel& model, const Vec& mu_e, const HeadAttractor& rho);

double free_energy_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                        const HeadAttractor& rho, const Precisions& prec);

Vec grad_mu_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                 const HeadAttractor& rho, const Precisions& prec);

Vec grad_mu_prime_head(const HeadModel& model, const BeliefState& belief, const HeadAttractor& rho,
                       const Precisions& prec);

Vec grad_action_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                     const Precisions& prec);

BeliefState step_head(const HeadModel& model, const BeliefState& belief, const HeadSensorFrame& sensors,
                      const HeadAttractor& rho, const Precisions& prec);

}  // namespace aif

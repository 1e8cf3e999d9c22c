#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aif {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised when inputs disagree in size or a configuration violates its invariants.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a geometric computation is too poorly conditioned to be trusted.
class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rigid-body pose: p_world = rotation * p_local + translation.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  /// Roll-pitch-yaw (applied as Rz(yaw) Ry(pitch) Rx(roll)), radians.
  static RigidTransform from_rpy(const Vec3& translation, double roll, double pitch, double yaw);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
  Eigen::Matrix4d matrix() const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// One row of a standard (distal) Denavit-Hartenberg table.
/// Link transform: Rz(q + theta_offset) Tz(d) Tx(a) Rx(alpha).
struct DhLink {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

Eigen::Matrix4d dh_matrix(const DhLink& link, double q);

/// Revolute serial chain: DH table, per-joint limits and base placement.
class KinematicChain {
 public:
  KinematicChain(std::vector<DhLink> links, Vec joint_lower, Vec joint_upper, Vec vel_limit,
                 RigidTransform base_pose = {}, std::vector<std::string> joint_names = {});

  int dof() const { return static_cast<int>(links_.size()); }
  const std::vector<DhLink>& links() const { return links_; }
  const Vec& joint_lower() const { return joint_lower_; }
  const Vec& joint_upper() const { return joint_upper_; }
  const Vec& vel_limit() const { return vel_limit_; }
  const RigidTransform& base_pose() const { return base_pose_; }
  const std::vector<std::string>& joint_names() const { return joint_names_; }

  Vec clamp_to_limits(const Vec& q) const;
  Vec clamp_velocity(const Vec& v) const;

  /// Copy with every link's a and d multiplied by the matching factor.
  KinematicChain with_scaled_links(const Vec& scale) const;

  void check_dimension(const Vec& q, const char* what) const;

 private:
  std::vector<DhLink> links_;
  Vec joint_lower_;
  Vec joint_upper_;
  Vec vel_limit_;
  RigidTransform base_pose_;
  std::vector<std::string> joint_names_;
};

/// World-frame pose of every joint frame, frames[0] is the base and frames[n] the end effector.
std::vector<RigidTransform> chain_frames(const KinematicChain& chain, const Vec& q);

RigidTransform forward_kinematics_pose(const KinematicChain& chain, const Vec& q);

/// End-effector position in the world frame.
Vec3 forward_kinematics(const KinematicChain& chain, const Vec& q);

/// Positional geometric Jacobian, 3 x dof, built from joint-axis cross products.
Mat geometric_jacobian(const KinematicChain& chain, const Vec& q);

/// Jacobian of the coordinates of a world-fixed point, expressed in the frame
/// `local` attached to the end of `chain`, w.r.t. the chain joints (3 x dof).
/// `local` is the pose of the observing frame relative to the end-effector frame.
Mat fixed_point_jacobian_in_moving_frame(const KinematicChain& chain, const Vec& q,
                                         const RigidTransform& local, const Vec3& point_world);

/// Default relative singular-value cutoff of pseudoinverse().
inline constexpr double kPinvRelativeTolerance = 1e-8;

/// Moore-Penrose pseudoinverse through the SVD, M+ = V S+ U^T.
/// Singular values below rel_tol * sigma_max are treated as zero.
Mat pseudoinverse(const Mat& m, double rel_tol = kPinvRelativeTolerance);

struct PinholeCamera {
  double fx = 257.0;
  double fy = 257.0;
  double cx = 160.0;
  double cy = 120.0;
  int width = 320;
  int height = 240;
  /// Camera frame (z optical axis, x right, y down) relative to the head end effector.
  RigidTransform mount;

  void validate() const;
  bool in_image(const Vec2& px) const;
};

struct CameraRig {
  PinholeCamera left;
  PinholeCamera right;

  void validate() const;
  double baseline() const;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  /// Positive depth and inside the image bounds.
  bool valid = false;
};

/// World pose of a camera for the given head configuration.
RigidTransform camera_pose(const KinematicChain& head, const Vec& head_q, const PinholeCamera& camera);

Projection project_camera_frame(const PinholeCamera& camera, const Vec3& point_camera);

/// Pinhole projection of a world point through head forward kinematics.
Projection project(const PinholeCamera& camera, const KinematicChain& head, const Vec& head_q,
                   const Vec3& point_world);

/// d(pixel)/d(point in camera frame), 2 x 3.
Eigen::Matrix<double, 2, 3> projection_jacobian(const PinholeCamera& camera, const Vec3& point_camera);

/// Minimum ray-angle sine below which triangulation refuses to answer.
inline constexpr double kMinRayAngleSine = 1e-6;

/// Midpoint of the common perpendicular of the two back-projected rays (world frame).
Vec3 triangulate(const CameraRig& rig, const KinematicChain& head, const Vec& head_q,
                 const Vec2& pixel_left, const Vec2& pixel_right);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace aif

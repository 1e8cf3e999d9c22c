#include "aif/kinematics.hpp"

#include <cmath>
#include <sstream>

namespace aif {

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_err = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!rotation_.allFinite() || !translation_.allFinite() || ortho_err > 1e-9 ||
      std::abs(rotation_.determinant() - 1.0) > 1e-9) {
    throw ConfigError("RigidTransform: rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::from_rpy(const Vec3& translation, double roll, double pitch, double yaw) {
  const Mat3 r = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                  Eigen::AngleAxisd(roll, Vec3::UnitX()))
                     .toRotationMatrix();
  return {r, translation};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Eigen::Matrix4d dh_matrix(const DhLink& link, double q) {
  const double th = q + link.theta_offset;
  const double ct = std::cos(th);
  const double st = std::sin(th);
  const double ca = std::cos(link.alpha);
  const double sa = std::sin(link.alpha);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, link.a * ct,
       st, ct * ca, -ct * sa, link.a * st,
       0.0, sa, ca, link.d,
       0.0, 0.0, 0.0, 1.0;
  return m;
}

KinematicChain::KinematicChain(std::vector<DhLink> links, Vec joint_lower, Vec joint_upper, Vec vel_limit,
                               RigidTransform base_pose, std::vector<std::string> joint_names)
    : links_(std::move(links)),
      joint_lower_(std::move(joint_lower)),
      joint_upper_(std::move(joint_upper)),
      vel_limit_(std::move(vel_limit)),
      base_pose_(base_pose),
      joint_names_(std::move(joint_names)) {
  const auto n = static_cast<Eigen::Index>(links_.size());
  if (n < 1) throw ConfigError("KinematicChain: at least one joint is required");
  if (joint_lower_.size() != n || joint_upper_.size() != n || vel_limit_.size() != n) {
    throw ConfigError("KinematicChain: limit vectors must have one entry per joint");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(joint_lower_[i] < joint_upper_[i])) {
      throw ConfigError("KinematicChain: joint_lower must be below joint_upper for joint " + std::to_string(i));
    }
    if (!(vel_limit_[i] > 0.0)) {
      throw ConfigError("KinematicChain: vel_limit must be positive for joint " + std::to_string(i));
    }
  }
  if (joint_names_.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) joint_names_.push_back("joint" + std::to_string(i));
  } else if (static_cast<Eigen::Index>(joint_names_.size()) != n) {
    throw ConfigError("KinematicChain: joint_names must have one entry per joint");
  }
}

Vec KinematicChain::clamp_to_limits(const Vec& q) const {
  check_dimension(q, "clamp_to_limits");
  return q.cwiseMax(joint_lower_).cwiseMin(joint_upper_);
}

Vec KinematicChain::clamp_velocity(const Vec& v) const {
  check_dimension(v, "clamp_velocity");
  return v.cwiseMax(-vel_limit_).cwiseMin(vel_limit_);
}

KinematicChain KinematicChain::with_scaled_links(const Vec& scale) const {
  check_dimension(scale, "with_scaled_links");
  auto links = links_;
  for (std::size_t i = 0; i < links.size(); ++i) {
    links[i].a *= scale[static_cast<Eigen::Index>(i)];
    links[i].d *= scale[static_cast<Eigen::Index>(i)];
  }
  return {links, joint_lower_, joint_upper_, vel_limit_, base_pose_, joint_names_};
}

void KinematicChain::check_dimension(const Vec& q, const char* what) const {
  if (q.size() != dof()) {
    std::ostringstream os;
    os << what << ": expected " << dof() << " joint values, got " << q.size();
    throw ConfigError(os.str());
  }
}

std::vector<RigidTransform> chain_frames(const KinematicChain& chain, const Vec& q) {
  chain.check_dimension(q, "forward_kinematics");
  std::vector<RigidTransform> frames;
  frames.reserve(chain.links().size() + 1);
  frames.push_back(chain.base_pose());
  Eigen::Matrix4d acc = chain.base_pose().matrix();
  for (int i = 0; i < chain.dof(); ++i) {
    acc = acc * dh_matrix(chain.links()[static_cast<std::size_t>(i)], q[i]);
    frames.emplace_back(Mat3(acc.topLeftCorner<3, 3>()), Vec3(acc.topRightCorner<3, 1>()));
  }
  return frames;
}

RigidTransform forward_kinematics_pose(const KinematicChain& chain, const Vec& q) {
  return chain_frames(chain, q).back();
}

Vec3 forward_kinematics(const KinematicChain& chain, const Vec& q) {
  chain.check_dimension(q, "forward_kinematics");
  Eigen::Matrix4d acc = chain.base_pose().matrix();
  for (int i = 0; i < chain.dof(); ++i) {
    acc = acc * dh_matrix(chain.links()[static_cast<std::size_t>(i)], q[i]);
  }
  return acc.topRightCorner<3, 1>();
}

Mat geometric_jacobian(const KinematicChain& chain, const Vec& q) {
  chain.check_dimension(q, "geometric_jacobian");
  const int n = chain.dof();
  std::vector<Eigen::Matrix4d> acc(static_cast<std::size_t>(n) + 1);
  acc[0] = chain.base_pose().matrix();
  for (int i = 0; i < n; ++i) {
    acc[static_cast<std::size_t>(i) + 1] = acc[static_cast<std::size_t>(i)] *
                                           dh_matrix(chain.links()[static_cast<std::size_t>(i)], q[i]);
  }
  const Vec3 p_end = acc.back().topRightCorner<3, 1>();
  Mat jac(3, n);
  for (int j = 0; j < n; ++j) {
    // Joint j rotates about the z axis of frame j (frame 0 is the base).
    const Vec3 z = acc[static_cast<std::size_t>(j)].block<3, 1>(0, 2);
    const Vec3 o = acc[static_cast<std::size_t>(j)].topRightCorner<3, 1>();
    jac.col(j) = z.cross(p_end - o);
  }
  return jac;
}

Mat fixed_point_jacobian_in_moving_frame(const KinematicChain& chain, const Vec& q,
                                         const RigidTransform& local, const Vec3& point_world) {
  chain.check_dimension(q, "fixed_point_jacobian_in_moving_frame");
  const int n = chain.dof();
  std::vector<Eigen::Matrix4d> acc(static_cast<std::size_t>(n) + 1);
  acc[0] = chain.base_pose().matrix();
  for (int i = 0; i < n; ++i) {
    acc[static_cast<std::size_t>(i) + 1] = acc[static_cast<std::size_t>(i)] *
                                           dh_matrix(chain.links()[static_cast<std::size_t>(i)], q[i]);
  }
  const Eigen::Matrix4d frame = acc.back() * local.matrix();
  const Mat3 r_t = frame.topLeftCorner<3, 3>().transpose();
  Mat jac(3, n);
  for (int j = 0; j < n; ++j) {
    const Vec3 z = acc[static_cast<std::size_t>(j)].block<3, 1>(0, 2);
    const Vec3 o = acc[static_cast<std::size_t>(j)].topRightCorner<3, 1>();
    // A world-fixed point seen from a frame rotating about (z, o) moves by -R^T [z]x (p - o).
    jac.col(j) = -(r_t * z.cross(point_world - o));
  }
  return jac;
}

Mat pseudoinverse(const Mat& m, double rel_tol) {
  if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());
  const Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s[0] : 0.0);
  Vec s_inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) s_inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
}

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera: image size must be positive");
}

bool PinholeCamera::in_image(const Vec2& px) const {
  return px.x() >= 0.0 && px.x() <= static_cast<double>(width) && px.y() >= 0.0 &&
         px.y() <= static_cast<double>(height);
}

void CameraRig::validate() const {
  left.validate();
  right.validate();
  if (!(baseline() > 0.0)) throw ConfigError("camera rig: baseline must be positive");
}

double CameraRig::baseline() const {
  return (left.mount.translation() - right.mount.translation()).norm();
}

RigidTransform camera_pose(const KinematicChain& head, const Vec& head_q, const PinholeCamera& camera) {
  return forward_kinematics_pose(head, head_q) * camera.mount;
}

Projection project_camera_frame(const PinholeCamera& camera, const Vec3& pc) {
  Projection out;
  out.depth = pc.z();
  if (!(pc.z() > 1e-9)) {
    out.pixel = Vec2(camera.cx, camera.cy);
    out.valid = false;
    return out;
  }
  out.pixel = Vec2(camera.cx + camera.fx * pc.x() / pc.z(), camera.cy + camera.fy * pc.y() / pc.z());
  out.valid = camera.in_image(out.pixel);
  return out;
}

Projection project(const PinholeCamera& camera, const KinematicChain& head, const Vec& head_q,
                   const Vec3& point_world) {
  const RigidTransform pose = camera_pose(head, head_q, camera);
  return project_camera_frame(camera, pose.inverse().apply(point_world));
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const PinholeCamera& camera, const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> j;
  j << camera.fx * iz, 0.0, -camera.fx * pc.x() * iz * iz,
       0.0, camera.fy * iz, -camera.fy * pc.y() * iz * iz;
  return j;
}

Vec3 triangulate(const CameraRig& rig, const KinematicChain& head, const Vec& head_q, const Vec2& pixel_left,
                 const Vec2& pixel_right) {
  const RigidTransform head_pose = forward_kinematics_pose(head, head_q);
  auto ray = [&](const PinholeCamera& cam, const Vec2& px, Vec3& origin) {
    const RigidTransform pose = head_pose * cam.mount;
    origin = pose.translation();
    const Vec3 dir_cam((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0);
    return Vec3((pose.rotation() * dir_cam).normalized());
  };
  Vec3 o1;
  Vec3 o2;
  const Vec3 d1 = ray(rig.left, pixel_left, o1);
  const Vec3 d2 = ray(rig.right, pixel_right, o2);

  const Vec3 w = o1 - o2;
  const double b = d1.dot(d2);
  const double denom = 1.0 - b * b;
  if (denom < kMinRayAngleSine * kMinRayAngleSine) {
    throw IllConditionedError("triangulate: rays are (nearly) parallel");
  }
  const double d = d1.dot(w);
  const double e = d2.dot(w);
  const double t1 = (b * e - d) / denom;
  const double t2 = (e - b * d) / denom;
  return 0.5 * ((o1 + t1 * d1) + (o2 + t2 * d2));
}

}  // namespace aif

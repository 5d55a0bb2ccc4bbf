#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "armsim/errors.hpp"
#include "armsim/transform.hpp"
#include "armsim/urdf_model.hpp"

namespace armsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {
inline void check_dims(std::size_t expected, Eigen::Index got, const char* what) {
  if (static_cast<Eigen::Index>(expected) != got) {
    throw Error(ErrorCode::DimensionMismatch, what,
                std::string(what) + ": expected " + std::to_string(expected) + " joint values, got " + std::to_string(got));
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// URDF-tree forward kinematics

/// origin * Rot(axis, q). Fixed joints ignore q.
inline Transform joint_transform(const Joint& joint, double q) {
  Transform t = joint.origin.transform();
  if (joint.kind == JointKind::Revolute && q != 0.0) {
    t = t * Transform::from_rotation(rot_axis(joint.axis.normalized(), q));
  }
  return t;
}

/// Tip pose of `chain` at joint values q (one per movable joint, base first).
inline Transform fk(const RobotModel& model, const Chain& chain, const VectorXd& q) {
  detail::check_dims(chain.dof(), q.size(), "fk");
  Transform pose;
  Eigen::Index k = 0;
  for (auto idx : chain.path) {
    const auto& j = model.joints[idx];
    pose = pose * joint_transform(j, j.kind == JointKind::Revolute ? q[k++] : 0.0);
  }
  return pose;
}

/// Pose of every link (indexed like model.links). Joints listed in `joints`
/// take the matching entry of q; all others sit at zero.
inline std::vector<Transform> link_poses(const RobotModel& model, std::span<const std::size_t> joints, const VectorXd& q) {
  detail::check_dims(joints.size(), q.size(), "link_poses");
  std::map<std::size_t, double> value;
  for (std::size_t k = 0; k < joints.size(); ++k) value[joints[k]] = q[static_cast<Eigen::Index>(k)];

  std::map<std::string, std::size_t> link_index;
  for (std::size_t i = 0; i < model.links.size(); ++i) link_index.emplace(model.links[i].name, i);

  std::vector<Transform> poses(model.links.size());
  std::vector<bool> done(model.links.size(), false);
  std::vector<std::string> frontier{model.root};
  if (auto it = link_index.find(model.root); it != link_index.end()) done[it->second] = true;
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      const auto pit = link_index.find(parent);
      if (pit == link_index.end()) continue;
      for (std::size_t i = 0; i < model.joints.size(); ++i) {
        const auto& j = model.joints[i];
        if (j.parent != parent) continue;
        const auto cit = link_index.find(j.child);
        if (cit == link_index.end() || done[cit->second]) continue;
        const auto v = value.find(i);
        poses[cit->second] = poses[pit->second] * joint_transform(j, v == value.end() ? 0.0 : v->second);
        done[cit->second] = true;
        next.push_back(j.child);
      }
    }
    frontier = std::move(next);
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Denavit-Hartenberg (standard / distal convention)

struct DHRow {
  double theta_offset = 0;
  double d = 0;
  double a = 0;
  double alpha = 0;
  int joint_index = 0;
};

/// RotZ(q + theta_offset) * TransZ(d) * TransX(a) * RotX(alpha)
inline Transform dh_transform(const DHRow& row, double q) {
  const double theta = q + row.theta_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Transform t;
  t.rotation << ct, -st * ca, st * sa,
                st, ct * ca, -ct * sa,
                0, sa, ca;
  t.translation << row.a * ct, row.a * st, row.d;
  return t;
}

inline Transform fk_dh(std::span<const DHRow> table, const VectorXd& q) {
  detail::check_dims(table.size(), q.size(), "fk_dh");
  Transform pose;
  for (std::size_t i = 0; i < table.size(); ++i) pose = pose * dh_transform(table[i], q[static_cast<Eigen::Index>(i)]);
  return pose;
}

// ---------------------------------------------------------------------------
// Jacobians

/// 6xN: rows 0-2 linear velocity, rows 3-5 angular velocity, world frame.
/// Column i is [z_i x (p_tip - p_i); z_i].
inline MatrixXd geometric_jacobian(const RobotModel& model, const Chain& chain, const VectorXd& q) {
  detail::check_dims(chain.dof(), q.size(), "geometric_jacobian");
  std::vector<Vec3> axes, origins;
  Transform pose;
  Eigen::Index k = 0;
  for (auto idx : chain.path) {
    const auto& j = model.joints[idx];
    if (j.kind == JointKind::Revolute) {
      const Transform at_joint = pose * j.origin.transform();
      axes.push_back(at_joint.rotation * j.axis.normalized());
      origins.push_back(at_joint.translation);
    }
    pose = pose * joint_transform(j, j.kind == JointKind::Revolute ? q[k++] : 0.0);
  }
  MatrixXd jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    jac.block<3, 1>(0, col) = axes[i].cross(pose.translation - origins[i]);
    jac.block<3, 1>(3, col) = axes[i];
  }
  return jac;
}

/// Central-difference Jacobian. Angular columns come from the rotation vector
/// of R(q-h)^T R(q+h), rotated into the world frame by R(q).
inline MatrixXd numeric_jacobian(const RobotModel& model, const Chain& chain, const VectorXd& q, double h) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidArgument, "h", "finite-difference step must be positive");
  detail::check_dims(chain.dof(), q.size(), "numeric_jacobian");
  const auto n = static_cast<Eigen::Index>(chain.dof());
  MatrixXd jac(6, n);
  const Mat3 r0 = fk(model, chain, q).rotation;
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Transform tp = fk(model, chain, qp);
    const Transform tm = fk(model, chain, qm);
    jac.block<3, 1>(0, i) = (tp.translation - tm.translation) / (2.0 * h);
    jac.block<3, 1>(3, i) = r0 * rotation_log(tm.rotation.transpose() * tp.rotation) / (2.0 * h);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// inverse kinematics

enum class BaseBranch { Front, Back };
enum class ElbowBranch { Up, Down };

struct IkBranch {
  BaseBranch base = BaseBranch::Front;
  ElbowBranch elbow = ElbowBranch::Up;
  bool operator==(const IkBranch&) const = default;
};

inline std::string to_string(const IkBranch& b) {
  return std::string(b.base == BaseBranch::Front ? "front" : "back") + "/" +
         (b.elbow == ElbowBranch::Up ? "elbow-up" : "elbow-down");
}

struct IkSolution {
  VectorXd q;
  std::optional<IkBranch> branch;  // closed-form solutions only
  bool verified = false;
  bool singular = false;   // shoulder singularity: base angle fixed by convention
  bool converged = false;  // iterative solutions
  int iterations = 0;
  double residual = 0;     // final task-space error norm
};

struct JointRange {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

inline std::vector<JointRange> joint_ranges(const RobotModel& model, const Chain& chain) {
  std::vector<JointRange> out;
  for (auto i : chain.movable) out.push_back({model.joints[i].limits.lower, model.joints[i].limits.upper});
  return out;
}

/// Base height L1, upper arm L2, forearm L3 of the yaw/pitch/pitch arm.
struct Arm3Params {
  double l1 = 0.5;
  double l2 = 0.4;
  double l3 = 0.3;
};

/// Closed-form tip position of the yaw/pitch/pitch arm.
inline Vec3 arm3_position(const Arm3Params& p, const Vec3& q) {
  const double reach = p.l2 * std::cos(q[1]) + p.l3 * std::cos(q[1] + q[2]);
  return {std::cos(q[0]) * reach, std::sin(q[0]) * reach,
          p.l1 + p.l2 * std::sin(q[1]) + p.l3 * std::sin(q[1] + q[2])};
}

inline constexpr double kIk3VerifyTol = 1e-9;

/// Geometric IK for the yaw/pitch/pitch arm: up to four branches
/// (front/back base x elbow up/down), coincident branches merged. Branches
/// outside `limits` are dropped, never clamped. Throws Unreachable when the
/// target lies outside the (L2-L3, L2+L3) annulus about the shoulder.
inline std::vector<IkSolution> ik_3dof(const Arm3Params& params, const Vec3& target,
                                       std::optional<std::array<JointRange, 3>> limits = std::nullopt) {
  if (!target.allFinite()) throw Error(ErrorCode::InvalidArgument, "target", "IK target must be finite");
  if (!(params.l1 > 0 && params.l2 > 0 && params.l3 > 0))
    throw Error(ErrorCode::InvalidArgument, "params", "arm lengths must be positive");
  const double l2 = params.l2, l3 = params.l3;
  const double r = std::hypot(target.x(), target.y());
  const double s = target.z() - params.l1;
  const double d2 = r * r + s * s;
  const double lo = (l2 - l3) * (l2 - l3), hi = (l2 + l3) * (l2 + l3);
  const double slack = 1e-12 * hi;
  if (d2 < lo - slack || d2 > hi + slack) {
    throw Error(ErrorCode::Unreachable, "target", "target outside the reachable annulus");
  }
  const double c3 = std::clamp((d2 - l2 * l2 - l3 * l3) / (2.0 * l2 * l3), -1.0, 1.0);
  // Within 1e-10 of full extension/fold the two elbow branches are one.
  const bool elbow_degenerate = std::abs(c3) > 1.0 - 1e-10;
  const double elbow = elbow_degenerate ? (c3 > 0 ? 0.0 : M_PI) : std::acos(c3);
  const bool singular = r <= 1e-12;

  std::vector<IkSolution> out;
  const std::array<BaseBranch, 2> bases{BaseBranch::Front, BaseBranch::Back};
  for (auto base : bases) {
    if (singular && base == BaseBranch::Back) continue;
    const double q1 = singular ? 0.0 : wrap_angle(std::atan2(target.y(), target.x()) + (base == BaseBranch::Back ? M_PI : 0.0));
    const double planar_r = base == BaseBranch::Front ? r : -r;
    for (int sign : {-1, 1}) {
      if (elbow_degenerate && sign > 0) continue;
      const double q3 = elbow_degenerate ? elbow : sign * elbow;
      const double q2 = wrap_angle(std::atan2(s, planar_r) - std::atan2(l3 * std::sin(q3), l2 + l3 * std::cos(q3)));
      IkSolution sol;
      sol.q = Eigen::Vector3d(q1, q2, wrap_angle(q3));
      const bool up = base == BaseBranch::Front ? q3 <= 0 : q3 >= 0;
      sol.branch = IkBranch{base, up ? ElbowBranch::Up : ElbowBranch::Down};
      sol.singular = singular;
      if (limits) {
        bool inside = true;
        for (int i = 0; i < 3; ++i) inside = inside && sol.q[i] >= (*limits)[i].lower && sol.q[i] <= (*limits)[i].upper;
        if (!inside) continue;
      }
      sol.residual = (arm3_position(params, sol.q) - target).norm();
      sol.verified = sol.residual <= kIk3VerifyTol;
      sol.converged = true;
      if (sol.verified) out.push_back(std::move(sol));
    }
  }
  return out;
}

/// Tip position error within tol.
inline bool verify_ik(const RobotModel& model, const Chain& chain, const VectorXd& q, const Vec3& target, double tol) {
  if (!(tol > 0)) throw Error(ErrorCode::InvalidArgument, "tol", "tolerance must be positive");
  return (fk(model, chain, q).translation - target).norm() <= tol;
}

/// Full pose: position within tol and rotation geodesic distance within tol_rot.
inline bool verify_ik(const RobotModel& model, const Chain& chain, const VectorXd& q, const Transform& target,
                      double tol, std::optional<double> tol_rot = std::nullopt) {
  if (!(tol > 0)) throw Error(ErrorCode::InvalidArgument, "tol", "tolerance must be positive");
  const Transform tip = fk(model, chain, q);
  return (tip.translation - target.translation).norm() <= tol &&
         rotation_distance(tip.rotation, target.rotation) <= tol_rot.value_or(tol);
}

struct DlsOptions {
  double tol = 1e-6;
  int max_iter = 200;
  double damping = 0.1;   // ceiling on lambda; lambda shrinks with the error, see ik_dls
  double max_step = 0.5;  // rad, per-iteration bound on |dq|; <= 0 disables
  bool position_only = true;
};

namespace detail {

inline VectorXd task_error(const Transform& tip, const Transform& target, bool position_only) {
  VectorXd e(position_only ? 3 : 6);
  e.head<3>() = target.translation - tip.translation;
  if (!position_only) e.tail<3>() = rotation_log(target.rotation * tip.rotation.transpose());
  return e;
}

}  // namespace detail

/// Damped least squares: q <- q + J^T (J J^T + lambda^2 I)^-1 e until |e| < tol.
/// lambda = min(damping, |e|): full damping far from the goal and near
/// singular poses, vanishing damping (Gauss-Newton speed) close to it. Steps
/// longer than max_step are shortened so the first move from a stretched arm
/// cannot fling the elbow into the folded singularity.
/// Without convergence the best iterate comes back with converged = false.
inline IkSolution ik_dls(const RobotModel& model, const Chain& chain, const VectorXd& q0, const Transform& target,
                         const DlsOptions& opts = {}) {
  if (!(opts.tol > 0) || opts.max_iter < 1 || !(opts.damping >= 0))
    throw Error(ErrorCode::InvalidArgument, "opts", "need tol > 0, max_iter >= 1, damping >= 0");
  detail::check_dims(chain.dof(), q0.size(), "ik_dls");
  if (!target.translation.allFinite() || !target.rotation.allFinite())
    throw Error(ErrorCode::InvalidArgument, "target", "IK target must be finite");

  const Eigen::Index rows = opts.position_only ? 3 : 6;
  IkSolution best;
  best.q = q0;
  best.residual = std::numeric_limits<double>::infinity();

  VectorXd q = q0;
  for (int iter = 0;; ++iter) {
    const VectorXd e = detail::task_error(fk(model, chain, q), target, opts.position_only);
    const double err = e.norm();
    if (err < best.residual) {
      best.q = q;
      best.residual = err;
      best.iterations = iter;
    }
    if (err < opts.tol) {
      best.converged = true;
      break;
    }
    if (iter == opts.max_iter) break;
    const MatrixXd jac = geometric_jacobian(model, chain, q).topRows(rows);
    const double lambda = std::min(opts.damping, err);
    const MatrixXd jjt = jac * jac.transpose() + lambda * lambda * MatrixXd::Identity(rows, rows);
    VectorXd dq = jac.transpose() * jjt.ldlt().solve(e);
    if (opts.max_step > 0 && dq.norm() > opts.max_step) dq *= opts.max_step / dq.norm();
    q += dq;
  }
  if (best.converged) {
    best.verified = opts.position_only ? verify_ik(model, chain, best.q, target.translation, opts.tol)
                                       : verify_ik(model, chain, best.q, target, opts.tol);
  }
  return best;
}

/// Position-only target.
inline IkSolution ik_dls(const RobotModel& model, const Chain& chain, const VectorXd& q0, const Vec3& target,
                         DlsOptions opts = {}) {
  opts.position_only = true;
  return ik_dls(model, chain, q0, Transform::from_translation(target), opts);
}

}  // namespace armsim

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "armsim/errors.hpp"
#include "armsim/kinematics.hpp"
#include "armsim/urdf_model.hpp"

namespace armsim {

struct PidGains {
  double p = 0;
  double i = 0;
  double d = 0;
  bool operator==(const PidGains&) const = default;
};

inline bool valid_gains(const PidGains& g) {
  return std::isfinite(g.p) && std::isfinite(g.i) && std::isfinite(g.d) && g.p >= 0 && g.i >= 0 && g.d >= 0;
}

struct PidState {
  double integral = 0;  // rad*s
  double prev_error = 0;
  bool initialized = false;
  double integral_clamp = std::numeric_limits<double>::infinity();
};

/// Bound on |integral| that keeps the integral term within the effort limit.
inline double default_integral_clamp(const PidGains& g, double effort_limit) {
  return effort_limit / std::max(g.i, 1e-12);
}

/// effort = p*e + i*integral + d*(e - prev_e)/dt. Derivative acts on the
/// error and is zero on the first call.
inline double pid_step(const PidGains& gains, PidState& state, double error, double dt) {
  state.integral = std::clamp(state.integral + error * dt, -state.integral_clamp, state.integral_clamp);
  const double derivative = state.initialized ? (error - state.prev_error) / dt : 0.0;
  state.prev_error = error;
  state.initialized = true;
  return gains.p * error + gains.i * state.integral + gains.d * derivative;
}

struct JointSimState {
  double q = 0;
  double qd = 0;
  double last_effort = 0;  // effort actually applied (after clamping)
  double inertia = 1.0;    // kg*m^2
  double damping = 1.0;    // N*m*s/rad
};

/// One semi-implicit Euler step of a decoupled joint:
/// I*qdd = clamp(effort_cmd) - damping*qd - gravity_torque. Leaving
/// [lower, upper] pins q to the bound and zeroes qd.
inline JointSimState joint_step(JointSimState state, double effort_cmd, double effort_limit, const JointRange& limits,
                                double dt, double gravity_torque = 0.0) {
  const double tau = std::clamp(effort_cmd, -effort_limit, effort_limit);
  const double qdd = (tau - state.damping * state.qd - gravity_torque) / state.inertia;
  state.qd += qdd * dt;
  state.q += state.qd * dt;
  if (state.q < limits.lower) {
    state.q = limits.lower;
    state.qd = 0;
  } else if (state.q > limits.upper) {
    state.q = limits.upper;
    state.qd = 0;
  }
  state.last_effort = tau;
  return state;
}

/// Gravitational potential sum(mass * g * z_com) over all links.
inline double potential_energy(const RobotModel& model, std::span<const std::size_t> joints, const VectorXd& q, double g) {
  const auto poses = link_poses(model, joints, q);
  double u = 0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& l = model.links[i];
    if (l.mass == 0) continue;
    u += l.mass * g * (poses[i] * l.inertial_origin.xyz).z();
  }
  return u;
}

inline constexpr double kGravityStep = 1e-6;

/// dU/dq by central differences: the torque each actuator must supply to hold
/// the arm still against gravity (world -z).
inline VectorXd gravity_torque(const RobotModel& model, std::span<const std::size_t> joints, const VectorXd& q, double g) {
  if (!(g >= 0)) throw Error(ErrorCode::InvalidArgument, "g", "gravity must be non-negative");
  detail::check_dims(joints.size(), q.size(), "gravity_torque");
  VectorXd tau = VectorXd::Zero(q.size());
  if (g == 0) return tau;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    VectorXd qp = q, qm = q;
    qp[i] += kGravityStep;
    qm[i] -= kGravityStep;
    tau[i] = (potential_energy(model, joints, qp, g) - potential_energy(model, joints, qm, g)) / (2 * kGravityStep);
  }
  return tau;
}

inline VectorXd gravity_torque(const RobotModel& model, const Chain& chain, const VectorXd& q, double g) {
  return gravity_torque(model, std::span<const std::size_t>(chain.movable), q, g);
}

}  // namespace armsim

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "armsim/bus.hpp"
#include "armsim/control.hpp"
#include "armsim/controllers.hpp"
#include "armsim/kinematics.hpp"
#include "armsim/urdf_model.hpp"

namespace armsim {

struct JointOverride {
  std::optional<double> inertia;
  std::optional<double> damping;
};

struct SimConfig {
  double dt = 1e-3;
  double gravity = 0.0;  // m/s^2, 0 disables
  std::map<std::string, JointOverride> overrides;
  double duration_cap = 3600.0;
  double default_inertia = 1.0;
  double default_damping = 1.0;
};

/// Per-joint simulation record.
struct SimJoint {
  std::string name;
  std::size_t model_index = 0;
  JointRange range;
  double effort_limit = 0;
  JointSimState state;
  std::optional<PositionController> controller;  // empty: passive joint
  PidState pid;
  double target = 0;
  std::optional<Subscription> commands;
};

/// One published state plus the targets the controllers were tracking.
struct TraceRow {
  JointStateMsg state;
  std::vector<double> targets;
};

struct TraceSummary {
  std::size_t steps = 0;
  JointStateMsg final_state;
};

using TraceSink = std::function<void(const TraceRow&)>;

/// The spawned robot: decoupled effort-driven joints under position PID,
/// stepped at a fixed dt, fed by command topics and publishing joint states
/// on the bus.
/// Holds handles into the bus it was spawned on; the bus must outlive it.
class Simulation {
 public:
  Simulation(Simulation&&) = default;
  Simulation& operator=(Simulation&&) = default;
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const RobotModel& model() const { return model_; }
  const ControllerSet& controllers() const { return controllers_; }
  const SimConfig& config() const { return cfg_; }
  const std::vector<SimJoint>& joints() const { return joints_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::size_t step_count() const { return steps_; }
  double time() const { return static_cast<double>(steps_) * cfg_.dt; }
  std::size_t publish_divisor() const { return divisor_; }
  const std::string& state_topic() const { return state_topic_; }

  /// "/<ns>/<controller>/command"
  std::string command_topic(const std::string& controller) const { return "/" + controllers_.ns + "/" + controller + "/command"; }

  std::optional<std::size_t> joint_slot(const std::string& name) const {
    for (std::size_t i = 0; i < joints_.size(); ++i)
      if (joints_[i].name == name) return i;
    return std::nullopt;
  }

  VectorXd positions() const {
    VectorXd q(static_cast<Eigen::Index>(joints_.size()));
    for (std::size_t i = 0; i < joints_.size(); ++i) q[static_cast<Eigen::Index>(i)] = joints_[i].state.q;
    return q;
  }

  JointStateMsg state_message() const {
    JointStateMsg m;
    m.t = time();
    for (const auto& j : joints_) {
      m.names.push_back(j.name);
      m.q.push_back(j.state.q);
      m.qd.push_back(j.state.qd);
      m.effort.push_back(j.state.last_effort);
    }
    return m;
  }

  std::vector<double> targets() const {
    std::vector<double> out;
    for (const auto& j : joints_) out.push_back(j.target);
    return out;
  }

  /// Advances one dt. Returns true when this step published a joint state.
  bool step() {
    for (auto& j : joints_) {
      if (!j.commands) continue;
      // last write wins within one step
      for (auto& m : j.commands->drain()) {
        if (const auto* cmd = std::get_if<ScalarCommand>(&m)) j.target = std::clamp(cmd->value, j.range.lower, j.range.upper);
      }
    }

    VectorXd gravity = VectorXd::Zero(static_cast<Eigen::Index>(joints_.size()));
    if (cfg_.gravity > 0) gravity = gravity_torque(model_, movable_, positions(), cfg_.gravity);

    for (std::size_t i = 0; i < joints_.size(); ++i) {
      auto& j = joints_[i];
      double effort = 0;
      if (j.controller) effort = pid_step(j.controller->gains, j.pid, j.target - j.state.q, cfg_.dt);
      j.state = joint_step(j.state, effort, j.effort_limit, j.range, cfg_.dt, gravity[static_cast<Eigen::Index>(i)]);
    }
    ++steps_;
    if (steps_ % divisor_ != 0) return false;
    state_pub_.publish(state_message());
    return true;
  }

  TraceSummary run(double duration, const TraceSink& sink = {}) {
    if (!(duration >= 0)) throw Error(ErrorCode::InvalidArgument, "duration", "duration must be non-negative");
    duration = std::min(duration, cfg_.duration_cap);
    const auto n = static_cast<std::size_t>(std::floor(duration / cfg_.dt + 1e-9));
    for (std::size_t k = 0; k < n; ++k) {
      if (step() && sink) sink(TraceRow{state_message(), targets()});
    }
    return {n, state_message()};
  }

 private:
  friend Simulation spawn(const RobotModel&, const ControllerSet&, const SimConfig&, Bus&);

  Simulation(RobotModel model, ControllerSet controllers, SimConfig cfg)
      : model_(std::move(model)), controllers_(std::move(controllers)), cfg_(std::move(cfg)) {}

  RobotModel model_;
  ControllerSet controllers_;
  SimConfig cfg_;
  std::vector<SimJoint> joints_;
  std::vector<std::size_t> movable_;
  std::vector<std::string> warnings_;
  Publisher state_pub_;
  std::string state_topic_;
  std::size_t divisor_ = 1;
  std::size_t steps_ = 0;
};

/// Builds a simulation from a model and controller set. Every controller
/// needs a transmission on its joint; a transmission without a controller
/// only warns and leaves the joint passive.
inline Simulation spawn(const RobotModel& model, const ControllerSet& controllers, const SimConfig& cfg, Bus& bus) {
  const auto diags = validate_model(model);
  for (const auto& d : diags) {
    if (d.severity == Severity::Error) throw Error(ErrorCode::InvalidConfig, d.subject, "invalid model: " + to_string(d));
  }
  if (!(cfg.dt > 0)) throw Error(ErrorCode::InvalidConfig, "dt", "dt must be positive");
  if (!(controllers.state_publish_rate > 0)) throw Error(ErrorCode::InvalidConfig, "publish_rate", "publish rate must be positive");
  if (cfg.dt > 1.0 / controllers.state_publish_rate + 1e-12)
    throw Error(ErrorCode::InvalidConfig, "dt", "dt exceeds the state publish period");
  if (!(cfg.gravity >= 0)) throw Error(ErrorCode::InvalidConfig, "gravity", "gravity must be non-negative");

  for (const auto& c : controllers.controllers) {
    const Joint* j = model.find_joint(c.joint);
    if (!j || j->kind != JointKind::Revolute)
      throw Error(ErrorCode::UnknownJoint, c.joint, "controller '" + c.name + "' drives unknown joint '" + c.joint + "'");
    if (!model.find_transmission(c.joint))
      throw Error(ErrorCode::MissingTransmission, c.joint, "joint '" + c.joint + "' has a controller but no transmission");
  }

  Simulation sim(model, controllers, cfg);
  sim.movable_ = revolute_joints(model);
  sim.divisor_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((1.0 / controllers.state_publish_rate) / cfg.dt)));
  sim.state_topic_ = "/" + controllers.ns + "/joint_states";
  sim.state_pub_ = bus.advertise(sim.state_topic_, MessageKind::JointStateMsg);

  for (auto idx : sim.movable_) {
    const Joint& j = model.joints[idx];
    SimJoint sj;
    sj.name = j.name;
    sj.model_index = idx;
    sj.range = {j.limits.lower, j.limits.upper};
    sj.effort_limit = j.limits.effort;
    sj.state.inertia = cfg.default_inertia;
    sj.state.damping = cfg.default_damping;
    if (auto o = cfg.overrides.find(j.name); o != cfg.overrides.end()) {
      if (o->second.inertia) sj.state.inertia = *o->second.inertia;
      if (o->second.damping) sj.state.damping = *o->second.damping;
    }
    if (!(sj.state.inertia > 0) || !(sj.state.damping >= 0))
      throw Error(ErrorCode::InvalidConfig, j.name, "joint inertia must be positive and damping non-negative");
    sj.state.q = std::clamp(0.0, sj.range.lower, sj.range.upper);
    sj.target = sj.state.q;
    if (const auto* c = controllers.for_joint(j.name)) {
      sj.controller = *c;
      sj.pid.integral_clamp = default_integral_clamp(c->gains, sj.effort_limit);
      sj.commands = bus.subscribe(sim.command_topic(c->name), MessageKind::ScalarCommand);
    } else if (model.find_transmission(j.name)) {
      sim.warnings_.push_back("MissingController: joint '" + j.name + "' has a transmission but no controller; it will move passively");
    }
    sim.joints_.push_back(std::move(sj));
  }
  return sim;
}

// ---------------------------------------------------------------------------
// CSV trace

inline void write_trace_header(std::ostream& out, const std::vector<std::string>& joint_names) {
  out << "t";
  for (const auto& n : joint_names) out << ',' << n << "_q," << n << "_qd," << n << "_effort," << n << "_target";
  out << '\n';
}

inline void write_trace_row(std::ostream& out, const TraceRow& row) {
  out << format_real(row.state.t);
  for (std::size_t i = 0; i < row.state.names.size(); ++i) {
    out << ',' << format_real(row.state.q[i]) << ',' << format_real(row.state.qd[i]) << ','
        << format_real(row.state.effort[i]) << ',' << format_real(row.targets[i]);
  }
  out << '\n';
}

}  // namespace armsim

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "armsim/bus.hpp"
#include "armsim/controllers.hpp"
#include "armsim/kinematics.hpp"
#include "armsim/serve.hpp"
#include "armsim/sim.hpp"
#include "armsim/urdf_model.hpp"

namespace armsim::cli {

/// Process exit codes.
enum Exit : int {
  kOk = 0,
  kUsage = 1,      // bad arguments, dimension mismatch, validation errors
  kIo = 2,         // unreadable file or parse failure
  kIkFailure = 3,  // unreachable target / no convergence
  kSpawnFailure = 4,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RobotModel load_model(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_urdf(text);
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline ControllerSet load_controllers(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_controllers(text);
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
}

/// Comma-separated reals; an empty string is an empty list.
inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(detail::parse_real(item, what));
    } catch (const Error&) {
      throw UsageError("bad number '" + item + "' in " + what);
    }
  }
  return out;
}

inline std::string fixed6(double v) {
  char buf[64];
  if (std::abs(v) < 5e-7) v = 0.0;  // no "-0.000000"
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline Chain chain_for(const RobotModel& model, const std::string& tip) {
  try {
    return movable_chain(model, tip.empty() ? default_tip(model) : tip);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Recovers (L1, L2, L3) when the chain has the yaw/pitch/pitch layout the
/// geometric solver assumes; nullopt otherwise.
inline std::optional<Arm3Params> match_arm3(const RobotModel& model, const Chain& chain) {
  if (chain.dof() != 3) return std::nullopt;
  const auto poses = [&](const VectorXd& q) { return fk(model, chain, q); };
  const auto& j1 = model.joints[chain.movable[0]];
  const auto& j2 = model.joints[chain.movable[1]];
  const auto& j3 = model.joints[chain.movable[2]];
  const auto near = [](const Vec3& a, const Vec3& b) { return (a - b).norm() < 1e-12; };

  // World frames of each joint at q = 0.
  Transform pose;
  std::vector<Transform> at;
  for (auto idx : chain.path) {
    const auto& j = model.joints[idx];
    if (j.kind == JointKind::Revolute) at.push_back(pose * j.origin.transform());
    pose = pose * j.origin.transform();
  }
  const Vec3 a1 = at[0].rotation * j1.axis, a2 = at[1].rotation * j2.axis, a3 = at[2].rotation * j3.axis;
  const Vec3 p1 = at[0].translation, p2 = at[1].translation, p3 = at[2].translation;
  const Vec3 tip = poses(VectorXd::Zero(3)).translation;
  if (!near(a1, Vec3::UnitZ()) || !near(a2, -Vec3::UnitY()) || !near(a3, -Vec3::UnitY())) return std::nullopt;
  if (!near(p1, Vec3::Zero())) return std::nullopt;
  if (std::abs(p2.x()) > 1e-12 || std::abs(p2.y()) > 1e-12) return std::nullopt;
  const Vec3 upper = p3 - p2, fore = tip - p3;
  if (std::abs(upper.y()) > 1e-12 || std::abs(upper.z()) > 1e-12 || std::abs(fore.y()) > 1e-12 ||
      std::abs(fore.z()) > 1e-12 || upper.x() <= 0 || fore.x() <= 0 || p2.z() <= 0)
    return std::nullopt;
  return Arm3Params{p2.z(), upper.x(), fore.x()};
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const std::string& urdf_path, bool show_warnings, std::ostream& out, std::ostream& err) {
  const RobotModel model = load_model(urdf_path);
  if (show_warnings)
    for (const auto& w : model.warnings) err << "warning: " << w << '\n';
  const auto diags = validate_model(model);
  for (const auto& d : diags) out << to_string(d) << '\n';
  return has_errors(diags) ? kUsage : kOk;
}

inline int cmd_fk(const std::string& urdf_path, const std::string& tip, const std::string& q_text, std::ostream& out) {
  const RobotModel model = load_model(urdf_path);
  const Chain chain = chain_for(model, tip);
  const auto q = parse_list(q_text, "--q");
  if (q.size() != chain.dof())
    throw UsageError("--q has " + std::to_string(q.size()) + " values, chain to '" + chain.tip + "' has " +
                     std::to_string(chain.dof()) + " joints");
  const Transform t = fk(model, chain, to_vector(q));
  const Vec3 rpy = matrix_to_rpy(t.rotation);
  out << fixed6(t.translation.x()) << ' ' << fixed6(t.translation.y()) << ' ' << fixed6(t.translation.z()) << ' '
      << fixed6(rpy.x()) << ' ' << fixed6(rpy.y()) << ' ' << fixed6(rpy.z()) << '\n';
  return kOk;
}

inline constexpr double kCliVerifyTol = 1e-6;

inline void print_solution(std::ostream& out, const VectorXd& q, const std::string& label, bool verified) {
  for (Eigen::Index i = 0; i < q.size(); ++i) out << (i ? " " : "") << fixed6(q[i]);
  out << ' ' << label << ' ' << (verified ? "verified" : "unverified") << '\n';
}

inline int cmd_ik(const std::string& urdf_path, const std::string& tip, const std::string& target_text,
                  const std::string& method, const std::string& q0_text, std::ostream& out) {
  const RobotModel model = load_model(urdf_path);
  const Chain chain = chain_for(model, tip);
  const auto t = parse_list(target_text, "--target");
  if (t.size() != 3) throw UsageError("--target needs x,y,z");
  const Vec3 target(t[0], t[1], t[2]);
  const auto ranges = joint_ranges(model, chain);

  if (method == "geometric") {
    const auto params = match_arm3(model, chain);
    if (!params) throw UsageError("geometric IK needs a yaw/pitch/pitch 3-joint chain; use --method dls");
    std::vector<IkSolution> sols;
    try {
      sols = ik_3dof(*params, target, std::array<JointRange, 3>{ranges[0], ranges[1], ranges[2]});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unreachable) throw;
    }
    if (sols.empty()) {
      out << "UNREACHABLE\n";
      return kIkFailure;
    }
    for (const auto& s : sols) {
      std::string label = to_string(*s.branch);
      if (s.singular) label += "/singular";
      print_solution(out, s.q, label, s.verified && verify_ik(model, chain, s.q, target, kCliVerifyTol));
    }
    return kOk;
  }
  if (method != "dls") throw UsageError("--method must be geometric or dls");

  auto q0 = parse_list(q0_text, "--q0");
  if (q0.empty()) q0.assign(chain.dof(), 0.0);
  if (q0.size() != chain.dof()) throw UsageError("--q0 must have " + std::to_string(chain.dof()) + " values");
  const IkSolution sol = ik_dls(model, chain, to_vector(q0), target);
  if (!sol.converged) {
    out << "UNREACHABLE\n";
    return kIkFailure;
  }
  print_solution(out, sol.q, "dls", sol.verified);
  return kOk;
}

struct ScriptedCommand {
  std::size_t step = 0;
  std::string joint;
  double value = 0;
};

inline ScriptedCommand parse_scripted(const std::string& text, double dt) {
  std::stringstream ss(text);
  std::vector<std::string> parts;
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 3) throw UsageError("--command expects \"t,joint,value\", got '" + text + "'");
  const auto t = parse_list(parts[0], "--command time");
  const auto v = parse_list(parts[2], "--command value");
  if (t.size() != 1 || v.size() != 1 || t[0] < 0) throw UsageError("bad --command '" + text + "'");
  // snap to the nearest step boundary
  return {static_cast<std::size_t>(std::llround(t[0] / dt)), parts[1], v[0]};
}

struct RunOptions {
  double duration = 1.0;
  double dt = 1e-3;
  double gravity = 0.0;
  std::string csv;  // empty: stdout
  std::vector<std::string> commands;
};

inline int cmd_run(const std::string& urdf_path, const std::string& controllers_path, const RunOptions& opts,
                   std::ostream& out, std::ostream& err) {
  const RobotModel model = load_model(urdf_path);
  const ControllerSet controllers = load_controllers(controllers_path);
  if (!(opts.duration >= 0)) throw UsageError("--duration must be non-negative");

  SimConfig cfg;
  cfg.dt = opts.dt;
  cfg.gravity = opts.gravity;
  Bus bus;
  std::optional<Simulation> sim;
  try {
    sim.emplace(spawn(model, controllers, cfg, bus));
  } catch (const Error& e) {
    err << "spawn failed: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidConfig ? kUsage : kSpawnFailure;
  }
  for (const auto& w : sim->warnings()) err << "warning: " << w << '\n';

  std::vector<ScriptedCommand> script;
  std::map<std::string, Publisher> pubs;
  for (const auto& text : opts.commands) {
    auto c = parse_scripted(text, cfg.dt);
    const auto* ctrl = controllers.for_joint(c.joint);
    if (!ctrl) throw UsageError("--command names joint '" + c.joint + "' which has no controller");
    if (!pubs.count(c.joint)) pubs.emplace(c.joint, bus.advertise(sim->command_topic(ctrl->name), MessageKind::ScalarCommand));
    script.push_back(std::move(c));
  }
  std::stable_sort(script.begin(), script.end(), [](const auto& a, const auto& b) { return a.step < b.step; });

  std::ofstream file;
  std::ostream* csv = &out;
  if (!opts.csv.empty()) {
    file.open(opts.csv, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write '" + opts.csv + "'");
    csv = &file;
  }
  std::vector<std::string> names;
  for (const auto& j : sim->joints()) names.push_back(j.name);
  write_trace_header(*csv, names);

  const auto steps = static_cast<std::size_t>(std::floor(opts.duration / cfg.dt + 1e-9));
  auto next = script.begin();
  for (std::size_t k = 0; k < steps; ++k) {
    for (; next != script.end() && next->step <= k; ++next) pubs.at(next->joint).publish(ScalarCommand{next->value});
    if (sim->step()) write_trace_row(*csv, TraceRow{sim->state_message(), sim->targets()});
  }
  csv->flush();
  return kOk;
}

inline std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline int cmd_serve(const std::string& urdf_path, const std::string& controllers_path, unsigned short port,
                     const std::string& address, double gravity, std::ostream& out, std::ostream& err) {
  const RobotModel model = load_model(urdf_path);
  const ControllerSet controllers = load_controllers(controllers_path);
  SimConfig cfg;
  cfg.gravity = gravity;
  std::optional<ServeBridge> bridge;
  try {
    bridge.emplace(model, controllers, cfg, ServeOptions{address, port});
  } catch (const Error& e) {
    err << "spawn failed: " << e.what() << '\n';
    return kSpawnFailure;
  }
  for (const auto& w : bridge->warnings()) err << "warning: " << w << '\n';
  const auto bound = bridge->start();
  out << "serving ws://" << address << ':' << bound << '\n' << std::flush;
  while (!stop_flag()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  bridge->stop();
  return kOk;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the binary and the tests. args excludes argv[0].
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Desk-scale serial arm simulator: URDF, kinematics, PID control, bus"};
  app.require_subcommand(1);

  std::string urdf, controllers_path, tip, q_text, target_text, method = "geometric", q0_text;
  bool show_warnings = false;
  RunOptions run_opts;
  unsigned short port = 9090;
  std::string address = "127.0.0.1";
  double serve_gravity = 0.0;

  auto* validate = app.add_subcommand("validate", "Check a URDF file against the model invariants");
  validate->add_option("urdf", urdf, "URDF file")->required();
  validate->add_flag("--warnings", show_warnings, "Also list ignored elements/attributes");

  auto* fk_cmd = app.add_subcommand("fk", "Forward kinematics: print tip x y z roll pitch yaw");
  fk_cmd->add_option("urdf", urdf, "URDF file")->required();
  fk_cmd->add_option("--tip", tip, "Tip link (default: deepest leaf)");
  fk_cmd->add_option("--q", q_text, "Joint angles, comma separated, radians")->required();

  auto* ik_cmd = app.add_subcommand("ik", "Inverse kinematics for a tip position");
  ik_cmd->add_option("urdf", urdf, "URDF file")->required();
  ik_cmd->add_option("--tip", tip, "Tip link (default: deepest leaf)");
  ik_cmd->add_option("--target", target_text, "Target x,y,z in metres")->required();
  ik_cmd->add_option("--method", method, "geometric or dls")->check(CLI::IsMember({"geometric", "dls"}));
  ik_cmd->add_option("--q0", q0_text, "DLS seed, comma separated (default zeros)");

  auto* run_cmd = app.add_subcommand("run", "Simulate and write a joint-state trace as CSV");
  run_cmd->add_option("urdf", urdf, "URDF file")->required();
  run_cmd->add_option("controllers", controllers_path, "Controller configuration")->required();
  run_cmd->add_option("--duration", run_opts.duration, "Simulated seconds");
  run_cmd->add_option("--dt", run_opts.dt, "Integration step, seconds");
  run_cmd->add_option("--csv", run_opts.csv, "Output CSV path (default stdout)");
  run_cmd->add_option("--command", run_opts.commands, "Scripted command \"t,joint,value\" (repeatable)");
  run_cmd->add_option("--gravity", run_opts.gravity, "Gravity m/s^2 (0 disables)");

  auto* serve_cmd = app.add_subcommand("serve", "Run paced to wall clock and bridge to websocket clients");
  serve_cmd->add_option("urdf", urdf, "URDF file")->required();
  serve_cmd->add_option("controllers", controllers_path, "Controller configuration")->required();
  serve_cmd->add_option("--port", port, "TCP port");
  serve_cmd->add_option("--address", address, "Bind address");
  serve_cmd->add_option("--gravity", serve_gravity, "Gravity m/s^2 (0 disables)");

  std::vector<std::string> argv_storage{"armsim"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(urdf, show_warnings, out, err);
    if (*fk_cmd) return cmd_fk(urdf, tip, q_text, out);
    if (*ik_cmd) return cmd_ik(urdf, tip, target_text, method, q0_text, out);
    if (*run_cmd) return cmd_run(urdf, controllers_path, run_opts, out, err);
    if (*serve_cmd) return cmd_serve(urdf, controllers_path, port, address, serve_gravity, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::DimensionMismatch || e.code() == ErrorCode::InvalidArgument ? kUsage : kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace armsim::cli

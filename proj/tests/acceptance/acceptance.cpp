// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "armsim/cli.hpp"
#include "armsim/reference_arm.hpp"
#include "fixtures.hpp"

using namespace armsim;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

/// Collects the first failed check's message.
class Checker {
 public:
  void operator()(bool cond, const std::string& what) {
    if (!cond && outcome_.ok) {
      outcome_.ok = false;
      outcome_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (outcome_.ok) outcome_.detail = s;
  }
  Outcome result() const { return outcome_; }

 private:
  Outcome outcome_;
};

const RobotModel& arm() {
  static const RobotModel m = reference::arm_model();
  return m;
}

const Chain& arm_chain() {
  static const Chain c = movable_chain(arm(), reference::kTipLink);
  return c;
}

VectorXd random_in_limits(std::mt19937_64& rng) {
  VectorXd q(3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const auto& lim = arm().joints[arm_chain().movable[static_cast<std::size_t>(i)]].limits;
    q[i] = std::uniform_real_distribution<double>(lim.lower, lim.upper)(rng);
  }
  return q;
}

Outcome macro_fragment() {
  Checker check;
  const auto model = parse_urdf(fixtures::macro_fragment_document());
  const Link* base = model.find_link("base_link");
  const Link* mesh = model.find_link("link_01");
  check(base && mesh && model.joints.size() == 1, "fragment did not yield two links and one joint");
  if (!check.result().ok) return check.result();
  const Joint& j = model.joints[0];
  check(base->mass == 1024, "base mass");
  check(base->inertia.ixx == 170.667, "base ixx");
  check(j.axis == Vec3(0, 0, 1), "joint axis");
  check(j.origin.xyz.z() == 0.5, "joint origin z");
  check(j.limits == JointLimits{-3.14, 3.14, 1000, 0.5}, "joint limits");
  check(mesh->mass == 157.633, "mesh link mass");
  return check.result();
}

Outcome course_controllers() {
  Checker check;
  const auto set = parse_controllers(reference::kControllerConfig);
  check(set.ns == "arm_model", "namespace");
  check(set.state_publish_rate == 50, "publish rate");
  check(set.controllers.size() == 3, "controller count");
  const char* joints[] = {"base_to_00", "00_to_01", "01_to_02"};
  for (std::size_t i = 0; i < set.controllers.size() && i < 3; ++i) {
    check(set.controllers[i].joint == joints[i], "joint of controller " + std::to_string(i + 1));
    check(set.controllers[i].gains == PidGains{100.00, 0.01, 10.00}, "gains of controller " + std::to_string(i + 1));
  }
  return check.result();
}

Outcome fk_equivalence() {
  Checker check;
  std::mt19937_64 rng(101);
  const auto table = reference::arm_dh_table();
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const VectorXd q = random_in_limits(rng);
    worst = std::max(worst, (fk(arm(), arm_chain(), q).translation - fk_dh(table, q).translation).norm());
  }
  check(worst < 1e-9, "max deviation " + std::to_string(worst));
  std::ostringstream s;
  s << "max |fk - fk_dh| = " << worst << " m";
  check.note(s.str());
  return check.result();
}

Outcome ik_soundness() {
  Checker check;
  std::mt19937_64 rng(202);
  const auto ranges = joint_ranges(arm(), arm_chain());
  const std::array<JointRange, 3> limits{ranges[0], ranges[1], ranges[2]};
  int dls_ok = 0, returned = 0;
  for (int i = 0; i < 1000; ++i) {
    const VectorXd q = random_in_limits(rng);
    const Vec3 target = fk(arm(), arm_chain(), q).translation;
    const auto sols = ik_3dof({}, target, limits);
    check(!sols.empty(), "no closed-form solution for target " + std::to_string(i));
    for (const auto& s : sols) {
      ++returned;
      check(verify_ik(arm(), arm_chain(), s.q, target, 1e-6), "unverified solution for target " + std::to_string(i));
    }
    DlsOptions opts;
    opts.damping = 0.1;
    opts.tol = 1e-6;
    opts.max_iter = 200;
    if (ik_dls(arm(), arm_chain(), VectorXd::Zero(3), target, opts).converged) ++dls_ok;
  }
  check(dls_ok >= 990, "DLS converged on " + std::to_string(dls_ok) + "/1000");
  check.note(std::to_string(returned) + " closed-form solutions verified; DLS converged " + std::to_string(dls_ok) + "/1000");
  return check.result();
}

Outcome jacobian() {
  Checker check;
  std::mt19937_64 rng(303);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const VectorXd q = random_in_limits(rng);
    const MatrixXd diff = geometric_jacobian(arm(), arm_chain(), q) - numeric_jacobian(arm(), arm_chain(), q, 1e-6);
    worst = std::max(worst, diff.cwiseAbs().maxCoeff());
  }
  check(worst < 1e-5, "max entry difference " + std::to_string(worst));
  std::ostringstream s;
  s << "max entry difference " << worst;
  check.note(s.str());
  return check.result();
}

Outcome closed_loop() {
  Checker check;
  const PidGains gains{100, 0.01, 10};
  JointSimState s;  // inertia 1, damping 1
  PidState pid;
  pid.integral_clamp = default_integral_clamp(gains, 1000);
  const double dt = 1e-3, target = 0.5;
  double worst_after = 0;
  for (int k = 1; k <= 5000; ++k) {
    s = joint_step(s, pid_step(gains, pid, target - s.q, dt), 1000, {-3.14, 3.14}, dt);
    if (k >= 2000) worst_after = std::max(worst_after, std::abs(s.q - target));
  }
  check(worst_after < 0.01, "error after 2 s reached " + std::to_string(worst_after));
  std::ostringstream out;
  out << "max |error| for t >= 2 s: " << worst_after << " rad";
  check.note(out.str());
  return check.result();
}

Outcome spawn_gate() {
  Checker check;
  const auto controllers = parse_controllers(reference::kControllerConfig);
  for (const auto* joint : reference::kJointNames) {
    auto model = arm();
    std::erase_if(model.transmissions, [&](const Transmission& t) { return t.joint == joint; });
    Bus bus;
    try {
      spawn(model, controllers, {}, bus);
      check(false, std::string("spawn succeeded without transmission on ") + joint);
    } catch (const Error& e) {
      check(e.code() == ErrorCode::MissingTransmission && e.subject() == joint,
            std::string("wrong failure for ") + joint + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < controllers.controllers.size(); ++i) {
    auto reduced = controllers;
    const std::string joint = reduced.controllers[i].joint;
    reduced.controllers.erase(reduced.controllers.begin() + static_cast<std::ptrdiff_t>(i));
    Bus bus;
    auto sim = spawn(arm(), reduced, {}, bus);
    check(sim.warnings().size() == 1 && sim.warnings()[0].find(joint) != std::string::npos,
          "no MissingController warning for " + joint);
    const auto slot = sim.joint_slot(joint);
    check(slot && !sim.joints()[*slot].controller, joint + " is not passive");
  }
  return check.result();
}

Outcome determinism() {
  Checker check;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("armsim_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string urdf = std::string(ARMSIM_DATA_DIR) + "/reference_arm.urdf";
  const std::string ctrl = std::string(ARMSIM_DATA_DIR) + "/arm_controllers.yaml";
  std::string traces[2];
  for (int i = 0; i < 2; ++i) {
    cli::RunOptions opts;
    opts.duration = 1.0;
    opts.csv = (dir / ("run" + std::to_string(i) + ".csv")).string();
    opts.commands = {"0,base_to_00,0.5", "0.25,00_to_01,-0.4"};
    std::ostringstream out, err;
    check(cli::cmd_run(urdf, ctrl, opts, out, err) == cli::kOk, "cmd_run failed: " + err.str());
    std::ifstream in(opts.csv, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    traces[i] = ss.str();
  }
  fs::remove_all(dir);
  check(traces[0] == traces[1], "traces differ");
  const auto lines = std::count(traces[0].begin(), traces[0].end(), '\n');
  check(lines == 51, "expected header + 50 rows, got " + std::to_string(lines) + " lines");
  check.note("byte-identical, " + std::to_string(lines - 1) + " rows");
  return check.result();
}

Outcome bus_semantics() {
  Checker check;
  std::mt19937_64 rng(404);
  const std::vector<std::string> topics{"/a/x", "/a/y", "/b/z"};
  int fanouts = 0;
  for (int trial = 0; trial < 1000 && check.result().ok; ++trial) {
    Bus bus;
    std::map<std::string, Publisher> pubs;
    for (const auto& t : topics) pubs.emplace(t, bus.advertise(t, MessageKind::ScalarCommand));
    struct Probe {
      std::string topic;
      Subscription sub;
      std::vector<double> expected, received;
    };
    std::vector<Probe> probes;
    auto collect = [](Probe& p) {
      for (const auto& m : p.sub.drain_as<ScalarCommand>()) p.received.push_back(m.value);
    };
    double counter = 0;
    const int ops = std::uniform_int_distribution<int>(5, 60)(rng);
    for (int op = 0; op < ops; ++op) {
      const auto& topic = topics[std::uniform_int_distribution<std::size_t>(0, topics.size() - 1)(rng)];
      const int action = std::uniform_int_distribution<int>(0, 9)(rng);
      if (action < 2) {
        // a late subscriber must not see anything published before it existed
        probes.push_back({topic, bus.subscribe(topic, MessageKind::ScalarCommand), {}, {}});
      } else if (action == 2 && !probes.empty()) {
        collect(probes[std::uniform_int_distribution<std::size_t>(0, probes.size() - 1)(rng)]);
      } else {
        const double v = ++counter;
        std::size_t live = 0;
        for (auto& p : probes)
          if (p.topic == topic) {
            p.expected.push_back(v);
            ++live;
          }
        const std::size_t delivered = pubs.at(topic).publish(ScalarCommand{v});
        check(delivered == live, "fan-out count mismatch in trial " + std::to_string(trial));
        fanouts += static_cast<int>(delivered);
      }
    }
    for (auto& p : probes) {
      collect(p);
      check(p.received == p.expected, "FIFO/exactly-once/no-latch violated in trial " + std::to_string(trial));
    }
  }
  check.note("1000 trials, " + std::to_string(fanouts) + " deliveries checked");
  return check.result();
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "URDF macro fragment parsing", 1, macro_fragment},
      {2, "controller configuration parsing", 1, course_controllers},
      {3, "FK equivalence (URDF chain vs DH)", 1, fk_equivalence},
      {4, "IK soundness and completeness", 10, ik_soundness},
      {5, "geometric vs numeric Jacobian", 1, jacobian},
      {6, "closed-loop convergence", 1, closed_loop},
      {7, "spawn gate", 1, spawn_gate},
      {8, "deterministic CSV trace", 2, determinism},
      {9, "bus semantics", 5, bus_semantics},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.ok && secs > c.budget_s) o = {false, "took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s"};
    if (!o.ok) ++failed;
    std::printf("%s  %d. %-38s %8.3f s  %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}

#include <gtest/gtest.h>

#include <sstream>

#include "armsim/reference_arm.hpp"
#include "armsim/sim.hpp"

using namespace armsim;

namespace {

ControllerSet course_controllers() { return parse_controllers(reference::kControllerConfig); }

ErrorCode spawn_error(const RobotModel& model, const ControllerSet& controllers, SimConfig cfg = {}) {
  Bus bus;
  try {
    spawn(model, controllers, cfg, bus);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "spawn succeeded";
  return ErrorCode::InvalidArgument;
}

std::string trace(const std::vector<std::pair<std::size_t, double>>& script, double duration) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  auto pub = bus.advertise(sim.command_topic("joint1_position_controller"), MessageKind::ScalarCommand);
  std::ostringstream out;
  write_trace_header(out, {"base_to_00", "00_to_01", "01_to_02"});
  const auto n = static_cast<std::size_t>(duration / sim.config().dt + 1e-9);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& [at, value] : script)
      if (at == k) pub.publish(ScalarCommand{value});
    if (sim.step()) write_trace_row(out, {sim.state_message(), sim.targets()});
  }
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// parse_controllers

TEST(ParseControllers, CourseLayout) {
  const auto set = course_controllers();
  EXPECT_EQ(set.ns, "arm_model");
  EXPECT_EQ(set.state_controller, "joint_state_controller");
  EXPECT_EQ(set.state_publish_rate, 50.0);
  ASSERT_EQ(set.controllers.size(), 3u);
  const std::vector<std::string> joints{"base_to_00", "00_to_01", "01_to_02"};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(set.controllers[i].joint, joints[i]);
    EXPECT_EQ(set.controllers[i].gains, (PidGains{100, 0.01, 10}));
  }
  EXPECT_EQ(set.controllers[0].name, "joint1_position_controller");
}

TEST(ParseControllers, NestedLayout) {
  const auto set = parse_controllers(R"(arm_model:
  joint_state_controller:
    type: joint_state_controller/JointStateController
    publish_rate: 25
  j1:
    type: effort_controllers/JointPositionController
    joint: base_to_00
    pid: {p: 1, i: 0, d: 0.5}
)");
  EXPECT_EQ(set.ns, "arm_model");
  EXPECT_EQ(set.state_publish_rate, 25.0);
  ASSERT_EQ(set.controllers.size(), 1u);
  EXPECT_EQ(set.controllers[0].gains, (PidGains{1, 0, 0.5}));
}

TEST(ParseControllers, Errors) {
  auto code = [](const std::string& text) {
    try {
      parse_controllers(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code(""), ErrorCode::ParseError);
  EXPECT_EQ(code("arm_model:\n  a: [1,\n"), ErrorCode::ParseError);
  EXPECT_EQ(code("arm_model:\nj:\n  type: velocity_controllers/X\n"), ErrorCode::UnknownControllerType);
  // no state controller
  EXPECT_EQ(code("arm_model:\nj:\n  type: effort_controllers/JointPositionController\n  joint: a\n  pid: {p: 1, i: 0, d: 0}\n"),
            ErrorCode::ParseError);
  // missing pid gain
  std::string text = reference::kControllerConfig;
  text.replace(text.find("d: 10.00"), 8, "q: 10.00");
  EXPECT_EQ(code(text), ErrorCode::ParseError);
  // non-numeric rate
  text = reference::kControllerConfig;
  text.replace(text.find("publish_rate: 50"), 16, "publish_rate: fast");
  EXPECT_EQ(code(text), ErrorCode::ParseError);
  // duplicate joint
  text = reference::kControllerConfig;
  text.replace(text.find("joint: 00_to_01"), 15, "joint: base_to_00");
  EXPECT_EQ(code(text), ErrorCode::ParseError);
}

// ---------------------------------------------------------------------------
// spawn

TEST(Spawn, ReferenceArmTopics) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  EXPECT_EQ(bus.topic_count(), 4u);
  EXPECT_TRUE(bus.has_topic("/arm_model/joint_states"));
  for (const auto* c : {"joint1_position_controller", "joint2_position_controller", "joint3_position_controller"})
    EXPECT_TRUE(bus.has_topic(std::string("/arm_model/") + c + "/command")) << c;
  EXPECT_TRUE(sim.warnings().empty());
  EXPECT_EQ(sim.publish_divisor(), 20u);
  EXPECT_EQ(sim.positions(), VectorXd::Zero(3));
}

TEST(Spawn, MissingTransmission) {
  auto model = reference::arm_model();
  std::erase_if(model.transmissions, [](const Transmission& t) { return t.joint == "01_to_02"; });
  Bus bus;
  try {
    spawn(model, course_controllers(), {}, bus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingTransmission);
    EXPECT_EQ(e.subject(), "01_to_02");
  }
}

TEST(Spawn, UnknownJoint) {
  auto controllers = course_controllers();
  controllers.controllers[2].joint = "wrist";
  EXPECT_EQ(spawn_error(reference::arm_model(), controllers), ErrorCode::UnknownJoint);
  controllers.controllers[2].joint = "02_to_tip";  // fixed joints cannot be driven
  EXPECT_EQ(spawn_error(reference::arm_model(), controllers), ErrorCode::UnknownJoint);
}

TEST(Spawn, MissingControllerWarnsAndJointIsPassive) {
  auto controllers = course_controllers();
  controllers.controllers.pop_back();
  Bus bus;
  auto sim = spawn(reference::arm_model(), controllers, {}, bus);
  ASSERT_EQ(sim.warnings().size(), 1u);
  EXPECT_NE(sim.warnings()[0].find("01_to_02"), std::string::npos);
  EXPECT_EQ(bus.topic_count(), 3u);
  const auto slot = sim.joint_slot("01_to_02");
  ASSERT_TRUE(slot);
  EXPECT_FALSE(sim.joints()[*slot].controller);
}

TEST(Spawn, ConfigErrors) {
  const auto model = reference::arm_model();
  SimConfig cfg;
  cfg.dt = 0;
  EXPECT_EQ(spawn_error(model, course_controllers(), cfg), ErrorCode::InvalidConfig);
  cfg.dt = 0.05;  // longer than the 20 ms publish period
  EXPECT_EQ(spawn_error(model, course_controllers(), cfg), ErrorCode::InvalidConfig);
  cfg = {};
  cfg.gravity = -1;
  EXPECT_EQ(spawn_error(model, course_controllers(), cfg), ErrorCode::InvalidConfig);
  auto bad = model;
  bad.joints[0].axis = Vec3(0, 0, 2);
  EXPECT_EQ(spawn_error(bad, course_controllers()), ErrorCode::InvalidConfig);
}

// ---------------------------------------------------------------------------
// step / run

TEST(Step, HoldsPoseWithoutCommands) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  sim.run(1.0);
  EXPECT_EQ(sim.positions(), VectorXd::Zero(3));
}

TEST(Step, CommandIsClampedToLimits) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  auto pub = bus.advertise(sim.command_topic("joint2_position_controller"), MessageKind::ScalarCommand);
  pub.publish(ScalarCommand{7.0});
  sim.step();
  EXPECT_EQ(sim.targets()[1], 3.14);
  pub.publish(ScalarCommand{-7.0});
  sim.step();
  EXPECT_EQ(sim.targets()[1], -3.14);
}

TEST(Step, LastWriteWins) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  auto pub = bus.advertise(sim.command_topic("joint1_position_controller"), MessageKind::ScalarCommand);
  pub.publish(ScalarCommand{0.1});
  pub.publish(ScalarCommand{0.2});
  sim.step();
  EXPECT_EQ(sim.targets()[0], 0.2);
}

TEST(Step, BaseJointConverges) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  auto pub = bus.advertise(sim.command_topic("joint1_position_controller"), MessageKind::ScalarCommand);
  pub.publish(ScalarCommand{0.5});
  sim.run(2.0);
  EXPECT_LT(std::abs(sim.positions()[0] - 0.5), 0.01);
  EXPECT_NEAR(sim.time(), 2.0, 1e-12);
}

TEST(Step, PublishesOnDivisor) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  auto sub = bus.subscribe(sim.state_topic(), MessageKind::JointStateMsg);
  for (int k = 1; k <= 40; ++k) EXPECT_EQ(sim.step(), k % 20 == 0) << k;
  const auto states = sub.drain_as<JointStateMsg>();
  ASSERT_EQ(states.size(), 2u);
  EXPECT_NEAR(states[0].t, 0.02, 1e-12);
  EXPECT_EQ(states[0].names, (std::vector<std::string>{"base_to_00", "00_to_01", "01_to_02"}));
}

TEST(Run, ZeroDuration) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  int rows = 0;
  const auto summary = sim.run(0.0, [&](const TraceRow&) { ++rows; });
  EXPECT_EQ(summary.steps, 0u);
  EXPECT_EQ(rows, 0);
  EXPECT_EQ(summary.final_state.t, 0.0);
  EXPECT_EQ(summary.final_state.q, (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(sim.run(-1), Error);
}

TEST(Run, OneSecondFiftyRows) {
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), {}, bus);
  int rows = 0;
  const auto summary = sim.run(1.0, [&](const TraceRow&) { ++rows; });
  EXPECT_EQ(summary.steps, 1000u);
  EXPECT_EQ(rows, 50);
}

TEST(Run, Deterministic) {
  const std::vector<std::pair<std::size_t, double>> script{{0, 0.5}, {300, -1.0}, {700, 2.0}};
  const std::string a = trace(script, 1.0);
  const std::string b = trace(script, 1.0);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 51);
}

TEST(Run, GravityPullsPassiveArmDown) {
  auto controllers = course_controllers();
  for (auto& c : controllers.controllers) c.gains = {};
  SimConfig cfg;
  cfg.gravity = 9.81;
  Bus bus;
  auto sim = spawn(reference::arm_model(), controllers, cfg, bus);
  double prev = 0;
  for (int k = 0; k < 100; ++k) {
    sim.step();
    EXPECT_LT(sim.positions()[1], prev);
    prev = sim.positions()[1];
  }
  EXPECT_EQ(sim.positions()[0], 0.0);
}

TEST(Run, CourseGainsHoldAgainstGravity) {
  SimConfig cfg;
  cfg.gravity = 9.81;
  Bus bus;
  auto sim = spawn(reference::arm_model(), course_controllers(), cfg, bus);
  sim.run(3.0);
  // steady droop is about holding torque / p = 4.66 / 100 rad
  EXPECT_NEAR(sim.positions()[1], -0.0466, 0.005);
}

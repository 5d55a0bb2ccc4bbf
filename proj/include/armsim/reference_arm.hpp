#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "armsim/kinematics.hpp"
#include "armsim/urdf_model.hpp"

// The teaching arm used throughout the tests and the CLI defaults: a base yaw
// joint at the floor, a shoulder pitch joint L1 above it, an elbow pitch joint
// L2 further along, and a tool point L3 past the elbow. At q = 0 the upper arm
// and forearm point along +x; positive pitch lifts the arm.

namespace armsim::reference {

inline constexpr const char* kTipLink = "tip";
inline constexpr const char* kJointNames[3] = {"base_to_00", "00_to_01", "01_to_02"};

/// Link masses (kg); the centre of mass of each moving arm segment sits on its
/// own x axis, halfway along the segment.
struct ArmMasses {
  double turret = 2.0;
  double upper_arm = 1.0;
  double forearm = 0.5;
};

/// URDF text for the reference arm. `with_transmissions` adds an
/// EffortJointInterface transmission per revolute joint.
inline std::string arm_urdf(const Arm3Params& p = {}, bool with_transmissions = true, const ArmMasses& m = {}) {
  const auto f = [](double v) { return format_real(v); };
  // slender rod along x
  const auto inertia = [&](double mass, double len) {
    const double i_long = mass * len * len / 12.0 + 1e-4;
    return "<inertia ixx=\"" + f(1e-3) + "\" ixy=\"0\" ixz=\"0\" iyy=\"" + f(i_long) + "\" iyz=\"0\" izz=\"" + f(i_long) + "\"/>";
  };
  std::string s;
  s += "<?xml version=\"1.0\"?>\n";
  s += "<robot name=\"arm_model\">\n";
  s += "  <link name=\"base_link\">\n"
       "    <inertial><origin xyz=\"0 0 0.05\" rpy=\"0 0 0\"/><mass value=\"10\"/>"
       "<inertia ixx=\"0.1\" ixy=\"0\" ixz=\"0\" iyy=\"0.1\" iyz=\"0\" izz=\"0.1\"/></inertial>\n"
       "    <visual><origin xyz=\"0 0 0.05\" rpy=\"0 0 0\"/><geometry><box size=\"0.3 0.3 0.1\"/></geometry></visual>\n"
       "  </link>\n";
  s += "  <link name=\"link_00\">\n"
       "    <inertial><origin xyz=\"0 0 " + f(p.l1 / 2) + "\" rpy=\"0 0 0\"/><mass value=\"" + f(m.turret) + "\"/>" +
       "<inertia ixx=\"" + f(m.turret * p.l1 * p.l1 / 12 + 1e-4) + "\" ixy=\"0\" ixz=\"0\" iyy=\"" +
       f(m.turret * p.l1 * p.l1 / 12 + 1e-4) + "\" iyz=\"0\" izz=\"" + f(1e-3) + "\"/></inertial>\n" +
       "    <visual><origin xyz=\"0 0 " + f(p.l1 / 2) + "\" rpy=\"0 0 0\"/><geometry><cylinder radius=\"0.05\" length=\"" +
       f(p.l1) + "\"/></geometry></visual>\n"
       "  </link>\n";
  s += "  <link name=\"link_01\">\n"
       "    <inertial><origin xyz=\"" + f(p.l2 / 2) + " 0 0\" rpy=\"0 0 0\"/><mass value=\"" + f(m.upper_arm) + "\"/>" +
       inertia(m.upper_arm, p.l2) + "</inertial>\n" +
       "    <visual><origin xyz=\"" + f(p.l2 / 2) + " 0 0\" rpy=\"0 0 0\"/><geometry><box size=\"" + f(p.l2) +
       " 0.05 0.05\"/></geometry></visual>\n"
       "  </link>\n";
  s += "  <link name=\"link_02\">\n"
       "    <inertial><origin xyz=\"" + f(p.l3 / 2) + " 0 0\" rpy=\"0 0 0\"/><mass value=\"" + f(m.forearm) + "\"/>" +
       inertia(m.forearm, p.l3) + "</inertial>\n" +
       "    <visual><origin xyz=\"" + f(p.l3 / 2) + " 0 0\" rpy=\"0 0 0\"/><geometry><box size=\"" + f(p.l3) +
       " 0.04 0.04\"/></geometry></visual>\n"
       "  </link>\n";
  s += "  <link name=\"tip\"/>\n";

  const auto revolute = [&](const char* name, const char* parent, const char* child, const std::string& xyz, const char* axis) {
    return std::string("  <joint name=\"") + name + "\" type=\"revolute\">\n" +
           "    <origin xyz=\"" + xyz + "\" rpy=\"0 0 0\"/>\n" +
           "    <parent link=\"" + parent + "\"/>\n    <child link=\"" + child + "\"/>\n" +
           "    <axis xyz=\"" + axis + "\"/>\n" +
           "    <limit lower=\"-3.14\" upper=\"3.14\" effort=\"1000\" velocity=\"0.5\"/>\n  </joint>\n";
  };
  s += revolute("base_to_00", "base_link", "link_00", "0 0 0", "0 0 1");
  s += revolute("00_to_01", "link_00", "link_01", "0 0 " + f(p.l1), "0 -1 0");
  s += revolute("01_to_02", "link_01", "link_02", f(p.l2) + " 0 0", "0 -1 0");
  s += "  <joint name=\"02_to_tip\" type=\"fixed\">\n"
       "    <origin xyz=\"" + f(p.l3) + " 0 0\" rpy=\"0 0 0\"/>\n"
       "    <parent link=\"link_02\"/>\n    <child link=\"tip\"/>\n  </joint>\n";

  if (with_transmissions) {
    for (const char* j : kJointNames) {
      s += std::string("  <transmission name=\"") + j + "_trans\">\n" +
           "    <type>transmission_interface/SimpleTransmission</type>\n" +
           "    <joint name=\"" + j + "\"><hardwareInterface>hardware_interface/EffortJointInterface</hardwareInterface></joint>\n" +
           "    <actuator name=\"" + j + "_motor\"><mechanicalReduction>1</mechanicalReduction></actuator>\n" +
           "  </transmission>\n";
    }
  }
  s += "  <gazebo><plugin name=\"gazebo_ros_control\" filename=\"libgazebo_ros_control.so\"/></gazebo>\n";
  s += "</robot>\n";
  return s;
}

inline RobotModel arm_model(const Arm3Params& p = {}) { return parse_urdf(arm_urdf(p)); }

/// Standard-DH rows equivalent (in tip position) to arm_urdf.
inline std::vector<DHRow> arm_dh_table(const Arm3Params& p = {}) {
  return {
      {0.0, p.l1, 0.0, M_PI / 2, 0},
      {0.0, 0.0, p.l2, 0.0, 1},
      {0.0, 0.0, p.l3, 0.0, 2},
  };
}

/// Controller configuration in the course's layout.
inline constexpr const char* kControllerConfig = R"(arm_model:
# Publish all joint states -----
joint_state_controller:
  type: joint_state_controller/JointStateController
  publish_rate: 50

# Position Controllers -----
joint1_position_controller:
  type: effort_controllers/JointPositionController
  joint: base_to_00
  pid: {p: 100.00, i: 0.01, d: 10.00}

joint2_position_controller:
  type: effort_controllers/JointPositionController
  joint: 00_to_01
  pid: {p: 100.00, i: 0.01, d: 10.00}

joint3_position_controller:
  type: effort_controllers/JointPositionController
  joint: 01_to_02
  pid: {p: 100.00, i: 0.01, d: 10.00}
)";

}  // namespace armsim::reference

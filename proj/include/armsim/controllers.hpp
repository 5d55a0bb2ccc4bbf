#pragma once

#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "armsim/control.hpp"
#include "armsim/errors.hpp"

namespace armsim {

struct PositionController {
  std::string name;
  std::string joint;
  PidGains gains;
  bool operator==(const PositionController&) const = default;
};

struct ControllerSet {
  std::string ns;
  std::string state_controller = "joint_state_controller";
  double state_publish_rate = 0;  // Hz
  std::vector<PositionController> controllers;
  bool operator==(const ControllerSet&) const = default;

  const PositionController* for_joint(const std::string& joint) const {
    for (const auto& c : controllers)
      if (c.joint == joint) return &c;
    return nullptr;
  }
};

inline constexpr const char* kStateControllerType = "joint_state_controller/JointStateController";
inline constexpr const char* kPositionControllerType = "effort_controllers/JointPositionController";

namespace detail {

inline double yaml_real(const YAML::Node& node, const std::string& where) {
  if (!node || !node.IsScalar()) throw Error(ErrorCode::ParseError, where, "missing numeric field " + where);
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::ParseError, where, "field " + where + " is not a number: '" + node.Scalar() + "'");
  }
}

inline std::string yaml_string(const YAML::Node& node, const std::string& where) {
  if (!node || !node.IsScalar()) throw Error(ErrorCode::ParseError, where, "missing field " + where);
  return node.Scalar();
}

}  // namespace detail

/// Reads a ros_control style controller file. Two layouts are accepted: the
/// controller blocks nested under the namespace key, or following it as
/// siblings of an empty "namespace:" line.
inline ControllerSet parse_controllers(const std::string& text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, "", std::string("malformed controller file: ") + e.what());
  }
  if (!doc.IsMap() || doc.size() == 0) throw Error(ErrorCode::ParseError, "", "controller file is empty or not a mapping");

  ControllerSet set;
  auto first = doc.begin();
  set.ns = first->first.as<std::string>();
  std::vector<std::pair<std::string, YAML::Node>> blocks;
  if (first->second.IsMap()) {
    if (doc.size() != 1) throw Error(ErrorCode::ParseError, set.ns, "content after the namespace block");
    for (const auto& kv : first->second) blocks.emplace_back(kv.first.as<std::string>(), kv.second);
  } else if (first->second.IsNull()) {
    for (auto it = std::next(doc.begin()); it != doc.end(); ++it) blocks.emplace_back(it->first.as<std::string>(), it->second);
  } else {
    throw Error(ErrorCode::ParseError, set.ns, "first key must name the namespace");
  }

  bool have_state = false;
  std::set<std::string> joints;
  for (const auto& [name, block] : blocks) {
    if (!block.IsMap()) throw Error(ErrorCode::ParseError, name, "controller '" + name + "' is not a block of key: value pairs");
    const std::string type = detail::yaml_string(block["type"], name + ".type");
    if (type == kStateControllerType) {
      if (have_state) throw Error(ErrorCode::ParseError, name, "more than one joint state controller");
      set.state_controller = name;
      set.state_publish_rate = detail::yaml_real(block["publish_rate"], name + ".publish_rate");
      if (!(set.state_publish_rate > 0)) throw Error(ErrorCode::ParseError, name, "publish_rate must be positive");
      have_state = true;
    } else if (type == kPositionControllerType) {
      PositionController c;
      c.name = name;
      c.joint = detail::yaml_string(block["joint"], name + ".joint");
      const YAML::Node pid = block["pid"];
      if (!pid || !pid.IsMap()) throw Error(ErrorCode::ParseError, name + ".pid", "controller '" + name + "' has no pid block");
      c.gains.p = detail::yaml_real(pid["p"], name + ".pid.p");
      c.gains.i = detail::yaml_real(pid["i"], name + ".pid.i");
      c.gains.d = detail::yaml_real(pid["d"], name + ".pid.d");
      if (!valid_gains(c.gains)) throw Error(ErrorCode::ParseError, name + ".pid", "gains must be finite and non-negative");
      if (!joints.insert(c.joint).second) throw Error(ErrorCode::ParseError, name, "joint '" + c.joint + "' has two controllers");
      set.controllers.push_back(std::move(c));
    } else {
      throw Error(ErrorCode::UnknownControllerType, name, "controller '" + name + "' has unsupported type '" + type + "'");
    }
  }
  if (!have_state) throw Error(ErrorCode::ParseError, set.ns, "no joint_state_controller/JointStateController with publish_rate");
  return set;
}

}  // namespace armsim

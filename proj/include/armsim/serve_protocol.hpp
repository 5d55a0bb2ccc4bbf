#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "armsim/bus.hpp"
#include "armsim/errors.hpp"
#include "armsim/urdf_model.hpp"

// Frames exchanged with the teaching panel. Every websocket text message is
// one JSON object whose "kind" is ModelDescription, State, Command or Error.
//
//   ModelDescription  {kind, robot, namespace, tip, joints[], links[]}
//   State             {kind, t, names[], q[], qd[], effort[], target[]}
//   Command           {kind, joint, target}   or   {kind, ik_target: [x, y, z]}
//   Error             {kind, message}

namespace armsim::protocol {

using nlohmann::json;

struct JointCommand {
  std::string joint;
  double target = 0;
};

struct IkCommand {
  Vec3 target = Vec3::Zero();
};

using Command = std::variant<JointCommand, IkCommand>;

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json origin_json(const Origin& o) { return {{"xyz", vec_json(o.xyz)}, {"rpy", vec_json(o.rpy)}}; }

inline json geometry_json(const Geometry& g) {
  if (const auto* b = std::get_if<BoxGeometry>(&g)) return {{"type", "box"}, {"size", vec_json(b->size)}};
  if (const auto* c = std::get_if<CylinderGeometry>(&g)) return {{"type", "cylinder"}, {"radius", c->radius}, {"length", c->length}};
  if (const auto* m = std::get_if<MeshGeometry>(&g)) return {{"type", "mesh"}, {"path", m->path}, {"scale", vec_json(m->scale)}};
  return {{"type", "none"}};
}

/// `controlled` lists the joints that accept Command frames.
inline json model_description(const RobotModel& model, const std::string& ns, const std::string& tip,
                              const std::vector<std::string>& controlled) {
  json joints = json::array();
  for (const auto& j : model.joints) {
    json jj = {{"name", j.name},
               {"type", j.kind == JointKind::Revolute ? "revolute" : "fixed"},
               {"parent", j.parent},
               {"child", j.child},
               {"origin", origin_json(j.origin)},
               {"axis", vec_json(j.axis)}};
    if (j.kind == JointKind::Revolute) {
      jj["lower"] = j.limits.lower;
      jj["upper"] = j.limits.upper;
      jj["effort"] = j.limits.effort;
      jj["velocity"] = j.limits.velocity;
      jj["controlled"] = std::find(controlled.begin(), controlled.end(), j.name) != controlled.end();
    }
    joints.push_back(std::move(jj));
  }
  json links = json::array();
  for (const auto& l : model.links) {
    links.push_back({{"name", l.name}, {"visual_origin", origin_json(l.visual_origin)}, {"geometry", geometry_json(l.geometry)}});
  }
  return {{"kind", "ModelDescription"}, {"robot", model.name}, {"namespace", ns}, {"root", model.root},
          {"tip", tip},                 {"joints", joints},     {"links", links}};
}

inline json state(const JointStateMsg& m, const std::vector<double>& targets) {
  return {{"kind", "State"}, {"t", m.t}, {"names", m.names}, {"q", m.q}, {"qd", m.qd}, {"effort", m.effort}, {"target", targets}};
}

inline json error(const std::string& message) { return {{"kind", "Error"}, {"message", message}}; }

inline json command(const JointCommand& c) { return {{"kind", "Command"}, {"joint", c.joint}, {"target", c.target}}; }
inline json command(const IkCommand& c) { return {{"kind", "Command"}, {"ik_target", vec_json(c.target)}}; }

/// Decodes a client frame. Throws Error(InvalidMessage) for anything that is
/// not a well-formed Command naming a known joint with finite values.
inline Command parse_command(const std::string& text, const std::vector<std::string>& joint_names) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::InvalidMessage, "", "frame is not a JSON object");
  if (!doc.contains("kind") || doc["kind"] != "Command")
    throw Error(ErrorCode::InvalidMessage, "kind", "only Command frames are accepted");

  if (doc.contains("ik_target")) {
    const auto& t = doc["ik_target"];
    if (!t.is_array() || t.size() != 3 || !t[0].is_number() || !t[1].is_number() || !t[2].is_number())
      throw Error(ErrorCode::InvalidMessage, "ik_target", "ik_target must be [x, y, z]");
    IkCommand c{{t[0].get<double>(), t[1].get<double>(), t[2].get<double>()}};
    if (!c.target.allFinite()) throw Error(ErrorCode::InvalidMessage, "ik_target", "ik_target must be finite");
    return c;
  }
  if (!doc.contains("joint") || !doc["joint"].is_string() || !doc.contains("target") || !doc["target"].is_number())
    throw Error(ErrorCode::InvalidMessage, "", "Command needs {joint, target} or {ik_target}");
  JointCommand c{doc["joint"].get<std::string>(), doc["target"].get<double>()};
  if (!std::isfinite(c.target)) throw Error(ErrorCode::InvalidMessage, "target", "target must be finite");
  if (std::find(joint_names.begin(), joint_names.end(), c.joint) == joint_names.end())
    throw Error(ErrorCode::InvalidMessage, c.joint, "unknown joint '" + c.joint + "'");
  return c;
}

}  // namespace armsim::protocol

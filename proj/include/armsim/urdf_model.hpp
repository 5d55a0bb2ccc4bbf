#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "armsim/errors.hpp"
#include "armsim/transform.hpp"

namespace armsim {

struct InertiaTensor {
  double ixx = 0, ixy = 0, ixz = 0, iyy = 0, iyz = 0, izz = 0;
  bool operator==(const InertiaTensor&) const = default;
};

struct Origin {
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();

  Transform transform() const { return make_transform(xyz, rpy); }
  bool operator==(const Origin& o) const { return xyz == o.xyz && rpy == o.rpy; }
};

struct BoxGeometry {
  Vec3 size = Vec3::Zero();
  bool operator==(const BoxGeometry& o) const { return size == o.size; }
};

struct CylinderGeometry {
  double radius = 0;
  double length = 0;
  bool operator==(const CylinderGeometry&) const = default;
};

/// Mesh files are never loaded; the reference travels verbatim.
struct MeshGeometry {
  std::string path;
  Vec3 scale = Vec3::Ones();
  bool operator==(const MeshGeometry& o) const { return path == o.path && scale == o.scale; }
};

using Geometry = std::variant<std::monostate, BoxGeometry, CylinderGeometry, MeshGeometry>;

struct Link {
  std::string name;
  double mass = 0;  // 0 when the link carries no inertial block
  InertiaTensor inertia;
  Origin inertial_origin;
  Origin visual_origin;
  Geometry geometry;
  bool operator==(const Link&) const = default;
};

enum class JointKind { Revolute, Fixed };

struct JointLimits {
  double lower = 0, upper = 0, effort = 0, velocity = 0;
  bool operator==(const JointLimits&) const = default;
};

struct Joint {
  std::string name;
  JointKind kind = JointKind::Fixed;
  std::string parent;
  std::string child;
  Origin origin;
  Vec3 axis = Vec3::UnitX();
  JointLimits limits;  // meaningful for Revolute only

  bool operator==(const Joint& o) const {
    return name == o.name && kind == o.kind && parent == o.parent && child == o.child &&
           origin == o.origin && axis == o.axis && limits == o.limits;
  }
};

enum class HardwareInterface { EffortJointInterface };

struct Transmission {
  std::string name;
  std::string joint;
  HardwareInterface interface = HardwareInterface::EffortJointInterface;
  bool operator==(const Transmission&) const = default;
};

struct RobotModel {
  std::string name;
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<Transmission> transmissions;
  std::string root;
  std::vector<std::string> warnings;  // unknown elements/attributes met while parsing

  const Link* find_link(std::string_view n) const {
    auto it = std::find_if(links.begin(), links.end(), [&](const Link& l) { return l.name == n; });
    return it == links.end() ? nullptr : &*it;
  }
  const Joint* find_joint(std::string_view n) const {
    auto it = std::find_if(joints.begin(), joints.end(), [&](const Joint& j) { return j.name == n; });
    return it == joints.end() ? nullptr : &*it;
  }
  std::optional<std::size_t> joint_index(std::string_view n) const {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (joints[i].name == n) return i;
    return std::nullopt;
  }
  const Transmission* find_transmission(std::string_view joint) const {
    auto it = std::find_if(transmissions.begin(), transmissions.end(),
                           [&](const Transmission& t) { return t.joint == joint; });
    return it == transmissions.end() ? nullptr : &*it;
  }

  /// Structural equality; parse warnings are not part of the model.
  bool operator==(const RobotModel& o) const {
    return name == o.name && links == o.links && joints == o.joints &&
           transmissions == o.transmissions && root == o.root;
  }
};

// ---------------------------------------------------------------------------
// parsing

namespace detail {

using boost::property_tree::ptree;

inline double parse_real(const std::string& text, const std::string& what) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last != first && std::isspace(static_cast<unsigned char>(*(last - 1)))) --last;
  if (first != last && *first == '+') ++first;
  double value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last || !std::isfinite(value)) {
    throw Error(ErrorCode::BadNumber, what, "cannot parse '" + text + "' as a number in " + what);
  }
  return value;
}

inline Vec3 parse_vec3(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::vector<std::string> parts;
  for (std::string tok; in >> tok;) parts.push_back(tok);
  if (parts.size() != 3) throw Error(ErrorCode::BadNumber, what, "expected three numbers in " + what + ", got '" + text + "'");
  return {parse_real(parts[0], what), parse_real(parts[1], what), parse_real(parts[2], what)};
}

/// Attribute view over one element, tracking which attributes were consumed.
class Attrs {
 public:
  Attrs(const ptree& element, std::string context) : context_(std::move(context)) {
    if (auto a = element.get_child_optional("<xmlattr>")) attrs_ = &*a;
  }

  std::optional<std::string> get(const std::string& key) {
    if (!attrs_) return std::nullopt;
    auto v = attrs_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    used_.insert(key);
    return *v;
  }
  std::string require(const std::string& key) {
    auto v = get(key);
    if (!v) throw Error(ErrorCode::MissingField, context_ + "@" + key, "missing attribute '" + key + "' on " + context_);
    return *v;
  }
  double real(const std::string& key) { return parse_real(require(key), context_ + "@" + key); }
  std::optional<double> real_opt(const std::string& key) {
    auto v = get(key);
    if (!v) return std::nullopt;
    return parse_real(*v, context_ + "@" + key);
  }
  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    auto v = get(key);
    return v ? parse_vec3(*v, context_ + "@" + key) : fallback;
  }
  Vec3 vec3_required(const std::string& key) { return parse_vec3(require(key), context_ + "@" + key); }

  void warn_unused(std::vector<std::string>& warnings) const {
    if (!attrs_) return;
    for (const auto& [key, _] : *attrs_)
      if (!used_.count(key)) warnings.push_back("ignored attribute '" + key + "' on " + context_);
  }

 private:
  const ptree* attrs_ = nullptr;
  std::string context_;
  std::set<std::string> used_;
};

inline bool is_markup(const std::string& tag) { return tag == "<xmlattr>" || tag == "<xmlcomment>"; }

inline Origin parse_origin(const ptree& el, const std::string& ctx, std::vector<std::string>& warnings) {
  Attrs a(el, ctx);
  Origin o;
  o.xyz = a.vec3("xyz", Vec3::Zero());
  o.rpy = a.vec3("rpy", Vec3::Zero());
  a.warn_unused(warnings);
  return o;
}

inline void parse_inertial(const ptree& el, Link& link, std::vector<std::string>& warnings) {
  const std::string ctx = "link '" + link.name + "' inertial";
  bool have_mass = false;
  for (const auto& [tag, child] : el) {
    if (is_markup(tag)) continue;
    if (tag == "origin") {
      link.inertial_origin = parse_origin(child, ctx + " origin", warnings);
    } else if (tag == "mass") {
      Attrs a(child, ctx + " mass");
      link.mass = a.real("value");
      have_mass = true;
      a.warn_unused(warnings);
    } else if (tag == "inertia") {
      Attrs a(child, ctx + " inertia");
      auto& I = link.inertia;
      I.ixx = a.real("ixx");
      I.ixy = a.real_opt("ixy").value_or(0.0);
      I.ixz = a.real_opt("ixz").value_or(0.0);
      I.iyy = a.real("iyy");
      I.iyz = a.real_opt("iyz").value_or(0.0);
      I.izz = a.real("izz");
      a.warn_unused(warnings);
    } else {
      warnings.push_back("ignored element <" + tag + "> in " + ctx);
    }
  }
  if (!have_mass) throw Error(ErrorCode::MissingField, ctx, "inertial without mass on link '" + link.name + "'");
}

inline Geometry parse_geometry(const ptree& el, const std::string& ctx, std::vector<std::string>& warnings) {
  Geometry g;
  for (const auto& [tag, child] : el) {
    if (is_markup(tag)) continue;
    Attrs a(child, ctx + " " + tag);
    if (tag == "box") {
      g = BoxGeometry{a.vec3_required("size")};
    } else if (tag == "cylinder") {
      g = CylinderGeometry{a.real("radius"), a.real("length")};
    } else if (tag == "mesh") {
      g = MeshGeometry{a.require("filename"), a.vec3("scale", Vec3::Ones())};
    } else {
      warnings.push_back("ignored geometry <" + tag + "> in " + ctx);
      continue;
    }
    a.warn_unused(warnings);
  }
  return g;
}

inline Link parse_link(const ptree& el, std::vector<std::string>& warnings) {
  Attrs a(el, "link");
  Link link;
  link.name = a.require("name");
  a.warn_unused(warnings);
  const std::string ctx = "link '" + link.name + "'";
  for (const auto& [tag, child] : el) {
    if (is_markup(tag)) continue;
    if (tag == "inertial") {
      parse_inertial(child, link, warnings);
    } else if (tag == "visual") {
      for (const auto& [vtag, vchild] : child) {
        if (is_markup(vtag)) continue;
        if (vtag == "origin") {
          link.visual_origin = parse_origin(vchild, ctx + " visual origin", warnings);
        } else if (vtag == "geometry") {
          link.geometry = parse_geometry(vchild, ctx + " visual geometry", warnings);
        } else {
          warnings.push_back("ignored element <" + vtag + "> in " + ctx + " visual");
        }
      }
    } else {
      warnings.push_back("ignored element <" + tag + "> in " + ctx);
    }
  }
  return link;
}

inline JointKind parse_joint_kind(const std::string& type, const std::string& joint) {
  if (type == "revolute") return JointKind::Revolute;
  if (type == "fixed") return JointKind::Fixed;
  throw Error(ErrorCode::UnsupportedJoint, joint,
              "joint '" + joint + "' has unsupported type '" + type + "' (revolute and fixed only)");
}

inline Joint parse_joint(const ptree& el, std::vector<std::string>& warnings) {
  Attrs a(el, "joint");
  Joint j;
  j.name = a.require("name");
  j.kind = parse_joint_kind(a.require("type"), j.name);
  a.warn_unused(warnings);
  const std::string ctx = "joint '" + j.name + "'";
  bool have_parent = false, have_child = false, have_limit = false;
  for (const auto& [tag, child] : el) {
    if (is_markup(tag)) continue;
    Attrs c(child, ctx + " " + tag);
    if (tag == "origin") {
      j.origin.xyz = c.vec3("xyz", Vec3::Zero());
      j.origin.rpy = c.vec3("rpy", Vec3::Zero());
    } else if (tag == "parent") {
      j.parent = c.require("link");
      have_parent = true;
    } else if (tag == "child") {
      j.child = c.require("link");
      have_child = true;
    } else if (tag == "axis") {
      j.axis = c.vec3_required("xyz");
    } else if (tag == "limit") {
      j.limits.lower = c.real_opt("lower").value_or(0.0);
      j.limits.upper = c.real_opt("upper").value_or(0.0);
      j.limits.effort = c.real("effort");
      j.limits.velocity = c.real("velocity");
      have_limit = true;
    } else {
      warnings.push_back("ignored element <" + tag + "> in " + ctx);
      continue;
    }
    c.warn_unused(warnings);
  }
  if (!have_parent) throw Error(ErrorCode::MissingField, j.name + "/parent", ctx + " has no <parent>");
  if (!have_child) throw Error(ErrorCode::MissingField, j.name + "/child", ctx + " has no <child>");
  if (j.kind == JointKind::Revolute && !have_limit)
    throw Error(ErrorCode::MissingField, j.name + "/limit", "revolute " + ctx + " has no <limit>");
  if (j.kind == JointKind::Fixed) j.limits = {};
  return j;
}

inline std::optional<HardwareInterface> parse_interface(const std::string& text) {
  std::string_view name = text;
  if (auto slash = name.rfind('/'); slash != std::string_view::npos) name.remove_prefix(slash + 1);
  if (auto colon = name.rfind(':'); colon != std::string_view::npos) name.remove_prefix(colon + 1);
  if (name == "EffortJointInterface") return HardwareInterface::EffortJointInterface;
  return std::nullopt;
}

inline void parse_transmission(const ptree& el, RobotModel& model) {
  auto& warnings = model.warnings;
  Attrs a(el, "transmission");
  Transmission t;
  t.name = a.get("name").value_or("");
  a.warn_unused(warnings);
  const std::string ctx = "transmission '" + t.name + "'";
  bool have_joint = false;
  std::optional<HardwareInterface> iface;
  std::string iface_text;
  for (const auto& [tag, child] : el) {
    if (is_markup(tag)) continue;
    if (tag == "type" || tag == "actuator") continue;
    if (tag == "joint") {
      Attrs ja(child, ctx + " joint");
      t.joint = ja.require("name");
      ja.warn_unused(warnings);
      have_joint = true;
      for (const auto& [jtag, jchild] : child) {
        if (jtag != "hardwareInterface") continue;
        iface_text = jchild.get_value<std::string>();
        iface = parse_interface(iface_text);
      }
    } else {
      warnings.push_back("ignored element <" + tag + "> in " + ctx);
    }
  }
  if (!have_joint) throw Error(ErrorCode::MissingField, ctx, ctx + " names no joint");
  if (!iface) {
    warnings.push_back(ctx + " ignored: hardware interface '" + iface_text + "' is not EffortJointInterface");
    return;
  }
  t.interface = *iface;
  model.transmissions.push_back(std::move(t));
}

// <m_link_box .../> and <m_link_mesh .../>: flat-attribute link macros.
inline Link parse_link_macro(const ptree& el, bool mesh, std::vector<std::string>& warnings) {
  Attrs a(el, mesh ? "m_link_mesh" : "m_link_box");
  Link link;
  link.name = a.require("name");
  Origin o;
  o.xyz = a.vec3("origin_xyz", Vec3::Zero());
  o.rpy = a.vec3("origin_rpy", Vec3::Zero());
  link.inertial_origin = o;
  link.visual_origin = o;
  link.mass = a.real("mass");
  auto& I = link.inertia;
  I.ixx = a.real("ixx");
  I.ixy = a.real_opt("ixy").value_or(0.0);
  I.ixz = a.real_opt("ixz").value_or(0.0);
  I.iyy = a.real("iyy");
  I.iyz = a.real_opt("iyz").value_or(0.0);
  I.izz = a.real("izz");
  if (mesh) {
    link.geometry = MeshGeometry{a.require("meshfile"), a.vec3("meshscale", Vec3::Ones())};
  } else {
    link.geometry = BoxGeometry{a.vec3_required("size")};
  }
  a.warn_unused(warnings);
  return link;
}

// <m_joint .../>: flat-attribute joint macro.
inline Joint parse_joint_macro(const ptree& el, std::vector<std::string>& warnings) {
  Attrs a(el, "m_joint");
  Joint j;
  j.name = a.require("name");
  j.kind = parse_joint_kind(a.require("type"), j.name);
  j.axis = a.vec3("axis_xyz", Vec3::UnitX());
  j.origin.xyz = a.vec3("origin_xyz", Vec3::Zero());
  j.origin.rpy = a.vec3("origin_rpy", Vec3::Zero());
  j.parent = a.require("parent");
  j.child = a.require("child");
  if (j.kind == JointKind::Revolute) {
    j.limits.effort = a.real("limit_e");
    j.limits.lower = a.real("limit_l");
    j.limits.upper = a.real("limit_u");
    j.limits.velocity = a.real("limit_v");
  }
  a.warn_unused(warnings);
  return j;
}

/// The link with no parent joint; first such link in document order.
inline std::string find_root(const RobotModel& model) {
  std::set<std::string> children;
  for (const auto& j : model.joints) children.insert(j.child);
  for (const auto& l : model.links)
    if (!children.count(l.name)) return l.name;
  return model.links.empty() ? std::string{} : model.links.front().name;
}

}  // namespace detail

/// Parses the supported URDF subset, including the m_link_box / m_link_mesh /
/// m_joint macro elements. Unknown content is skipped and reported in
/// RobotModel::warnings.
inline RobotModel parse_urdf(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in(text);
    pt::read_xml(in, doc, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::XmlError, "", std::string("malformed XML: ") + e.what());
  }
  auto robot = doc.get_child_optional("robot");
  if (!robot) throw Error(ErrorCode::MissingField, "robot", "document has no <robot> element");

  RobotModel model;
  detail::Attrs ra(*robot, "robot");
  model.name = ra.get("name").value_or("");
  ra.warn_unused(model.warnings);

  for (const auto& [tag, el] : *robot) {
    if (detail::is_markup(tag)) continue;
    if (tag == "link") {
      model.links.push_back(detail::parse_link(el, model.warnings));
    } else if (tag == "joint") {
      model.joints.push_back(detail::parse_joint(el, model.warnings));
    } else if (tag == "transmission") {
      detail::parse_transmission(el, model);
    } else if (tag == "m_link_box" || tag == "m_link_mesh") {
      model.links.push_back(detail::parse_link_macro(el, tag == "m_link_mesh", model.warnings));
    } else if (tag == "m_joint") {
      model.joints.push_back(detail::parse_joint_macro(el, model.warnings));
    } else {
      model.warnings.push_back("ignored element <" + tag + "> in robot");
    }
  }
  model.root = detail::find_root(model);
  return model;
}

// ---------------------------------------------------------------------------
// serialization

/// Shortest decimal that parses back to exactly `v`.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_vec3(const Vec3& v) {
  return format_real(v.x()) + " " + format_real(v.y()) + " " + format_real(v.z());
}

/// Writes plain URDF elements (macros are emitted in expanded form).
inline std::string serialize_urdf(const RobotModel& model) {
  std::ostringstream out;
  auto origin = [&](const Origin& o, const char* indent) {
    out << indent << "<origin xyz=\"" << format_vec3(o.xyz) << "\" rpy=\"" << format_vec3(o.rpy) << "\"/>\n";
  };
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << model.name << "\">\n";
  for (const auto& l : model.links) {
    out << "  <link name=\"" << l.name << "\">\n";
    if (l.mass != 0.0) {
      const auto& I = l.inertia;
      out << "    <inertial>\n";
      origin(l.inertial_origin, "      ");
      out << "      <mass value=\"" << format_real(l.mass) << "\"/>\n";
      out << "      <inertia ixx=\"" << format_real(I.ixx) << "\" ixy=\"" << format_real(I.ixy)
          << "\" ixz=\"" << format_real(I.ixz) << "\" iyy=\"" << format_real(I.iyy)
          << "\" iyz=\"" << format_real(I.iyz) << "\" izz=\"" << format_real(I.izz) << "\"/>\n";
      out << "    </inertial>\n";
    }
    if (!std::holds_alternative<std::monostate>(l.geometry)) {
      out << "    <visual>\n";
      origin(l.visual_origin, "      ");
      out << "      <geometry>\n";
      if (const auto* b = std::get_if<BoxGeometry>(&l.geometry)) {
        out << "        <box size=\"" << format_vec3(b->size) << "\"/>\n";
      } else if (const auto* c = std::get_if<CylinderGeometry>(&l.geometry)) {
        out << "        <cylinder radius=\"" << format_real(c->radius) << "\" length=\"" << format_real(c->length) << "\"/>\n";
      } else if (const auto* m = std::get_if<MeshGeometry>(&l.geometry)) {
        out << "        <mesh filename=\"" << m->path << "\" scale=\"" << format_vec3(m->scale) << "\"/>\n";
      }
      out << "      </geometry>\n    </visual>\n";
    }
    out << "  </link>\n";
  }
  for (const auto& j : model.joints) {
    out << "  <joint name=\"" << j.name << "\" type=\"" << (j.kind == JointKind::Revolute ? "revolute" : "fixed") << "\">\n";
    origin(j.origin, "    ");
    out << "    <parent link=\"" << j.parent << "\"/>\n";
    out << "    <child link=\"" << j.child << "\"/>\n";
    out << "    <axis xyz=\"" << format_vec3(j.axis) << "\"/>\n";
    if (j.kind == JointKind::Revolute) {
      out << "    <limit lower=\"" << format_real(j.limits.lower) << "\" upper=\"" << format_real(j.limits.upper)
          << "\" effort=\"" << format_real(j.limits.effort) << "\" velocity=\"" << format_real(j.limits.velocity) << "\"/>\n";
    }
    out << "  </joint>\n";
  }
  for (const auto& t : model.transmissions) {
    out << "  <transmission name=\"" << t.name << "\">\n"
        << "    <type>transmission_interface/SimpleTransmission</type>\n"
        << "    <joint name=\"" << t.joint << "\">\n"
        << "      <hardwareInterface>hardware_interface/EffortJointInterface</hardwareInterface>\n"
        << "    </joint>\n"
        << "    <actuator name=\"" << t.joint << "_motor\">\n"
        << "      <mechanicalReduction>1</mechanicalReduction>\n"
        << "    </actuator>\n"
        << "  </transmission>\n";
  }
  out << "</robot>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// validation

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string subject;
  std::string message;
};

inline std::string to_string(const Diagnostic& d) {
  return std::string(d.severity == Severity::Error ? "error" : "warning") + ": " + d.subject + ": " + d.message;
}

/// One diagnostic per violated model invariant; empty for a valid model.
inline std::vector<Diagnostic> validate_model(const RobotModel& model) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string subject, std::string message) {
    out.push_back({Severity::Error, std::move(subject), std::move(message)});
  };

  std::map<std::string, const Link*> links;
  for (const auto& l : model.links) {
    if (!links.emplace(l.name, &l).second) error(l.name, "duplicate link name");
  }
  std::set<std::string> joint_names;
  for (const auto& j : model.joints) {
    if (!joint_names.insert(j.name).second) error(j.name, "duplicate joint name");
  }

  std::map<std::string, int> parent_count;
  std::map<std::string, std::string> parent_of;  // child link -> parent link
  std::set<std::string> movable;
  for (const auto& j : model.joints) {
    if (!links.count(j.parent)) error(j.name, "parent link '" + j.parent + "' does not exist");
    if (!links.count(j.child)) error(j.name, "child link '" + j.child + "' does not exist");
    if (j.parent == j.child) error(j.name, "parent and child are the same link");
    if (++parent_count[j.child] == 2) error(j.child, "link has more than one parent joint");
    parent_of.emplace(j.child, j.parent);
    if (j.kind == JointKind::Revolute) {
      movable.insert(j.child);
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) error(j.name, "axis not unit");
      if (!(j.limits.lower < j.limits.upper)) error(j.name, "lower limit not below upper limit");
      if (!(j.limits.effort > 0)) error(j.name, "effort limit not positive");
      if (!(j.limits.velocity > 0)) error(j.name, "velocity limit not positive");
    }
  }

  for (const auto& l : model.links) {
    if (movable.count(l.name) && !(l.mass > 0)) error(l.name, "movable link has non-positive mass");
    if (l.mass > 0) {
      const auto& I = l.inertia;
      if (!(I.ixx > 0 && I.iyy > 0 && I.izz > 0)) error(l.name, "inertia diagonal not positive");
    }
  }

  // Tree shape: exactly one root, and every link reaches it.
  std::vector<std::string> roots;
  for (const auto& l : model.links)
    if (!parent_count.count(l.name)) roots.push_back(l.name);
  if (!model.links.empty() && roots.empty()) error(model.name, "no root link (every link has a parent)");
  if (roots.size() > 1) {
    std::string names;
    for (const auto& r : roots) names += (names.empty() ? "" : ", ") + r;
    error(model.name, "multiple root links: " + names);
  }
  if (!model.root.empty() && !links.count(model.root)) error(model.root, "root link does not exist");

  std::set<std::string> on_cycle;
  for (const auto& l : model.links) {
    if (on_cycle.count(l.name)) continue;
    std::vector<std::string> path;
    std::set<std::string> seen;
    std::string cur = l.name;
    while (true) {
      if (seen.count(cur)) {
        auto start = std::find(path.begin(), path.end(), cur);
        std::string names;
        for (auto it = start; it != path.end(); ++it) {
          names += (names.empty() ? "" : " -> ") + *it;
          on_cycle.insert(*it);
        }
        error(cur, "joints form a cycle: " + names);
        break;
      }
      if (on_cycle.count(cur)) break;
      seen.insert(cur);
      path.push_back(cur);
      auto it = parent_of.find(cur);
      if (it == parent_of.end()) break;
      cur = it->second;
    }
  }

  for (const auto& t : model.transmissions) {
    const Joint* j = model.find_joint(t.joint);
    if (!j) {
      error(t.name.empty() ? t.joint : t.name, "transmission references missing joint '" + t.joint + "'");
    } else if (j->kind != JointKind::Revolute) {
      error(t.name.empty() ? t.joint : t.name, "transmission references non-revolute joint '" + t.joint + "'");
    }
  }
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

// ---------------------------------------------------------------------------
// chains

/// Root-to-tip path through the tree. `path` holds every joint traversed
/// (fixed ones included); `movable` the revolute subset, base first.
struct Chain {
  std::vector<std::size_t> path;
  std::vector<std::size_t> movable;
  std::string tip;

  std::size_t dof() const { return movable.size(); }

  std::vector<std::string> names(const RobotModel& model) const {
    std::vector<std::string> out;
    for (auto i : movable) out.push_back(model.joints[i].name);
    return out;
  }
};

inline Chain movable_chain(const RobotModel& model, const std::string& tip_link) {
  if (!model.find_link(tip_link)) throw Error(ErrorCode::UnknownLink, tip_link, "unknown link '" + tip_link + "'");
  Chain chain;
  chain.tip = tip_link;
  std::string cur = tip_link;
  std::set<std::string> seen;
  while (cur != model.root) {
    if (!seen.insert(cur).second) break;
    auto it = std::find_if(model.joints.begin(), model.joints.end(),
                           [&](const Joint& j) { return j.child == cur; });
    if (it == model.joints.end()) break;
    chain.path.push_back(static_cast<std::size_t>(it - model.joints.begin()));
    cur = it->parent;
  }
  if (cur != model.root)
    throw Error(ErrorCode::UnreachableLink, tip_link, "link '" + tip_link + "' is not reachable from root '" + model.root + "'");
  std::reverse(chain.path.begin(), chain.path.end());
  for (auto i : chain.path)
    if (model.joints[i].kind == JointKind::Revolute) chain.movable.push_back(i);
  return chain;
}

/// Deepest leaf link (ties broken by document order); the natural tip of a serial arm.
inline std::string default_tip(const RobotModel& model) {
  std::string best = model.root;
  std::size_t best_depth = 0;
  for (const auto& l : model.links) {
    try {
      const auto c = movable_chain(model, l.name);
      if (c.path.size() > best_depth) {
        best_depth = c.path.size();
        best = l.name;
      }
    } catch (const Error&) {
    }
  }
  return best;
}

/// Every revolute joint reachable from the root, parents before children.
inline std::vector<std::size_t> revolute_joints(const RobotModel& model) {
  std::vector<std::size_t> out;
  std::vector<std::string> frontier{model.root};
  std::set<std::string> visited{model.root};
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& link : frontier) {
      for (std::size_t i = 0; i < model.joints.size(); ++i) {
        const auto& j = model.joints[i];
        if (j.parent != link || !visited.insert(j.child).second) continue;
        if (j.kind == JointKind::Revolute) out.push_back(i);
        next.push_back(j.child);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace armsim

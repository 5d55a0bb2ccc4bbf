#pragma once

#include <string>

namespace armsim::fixtures {

// Course URDF excerpt in macro form, exactly as distributed with the
// exercise; the ${...} placeholders are xacro properties.
inline constexpr const char* kMacroFragment = R"(<!-- BGN - Robot description -->
<m_link_box name="${link_00_name}"
  origin_rpy="0 0 0" origin_xyz="0 0 0"
  mass="1024"
  ixx="170.667" ixy="0" ixz="0"
  iyy="170.667" iyz="0"
  izz="170.667"
  size="1 1 1" />

<m_joint name="${link_00_name}_${link_01_name}" type="revolute"
  axis_xyz="0 0 1"
  origin_rpy="0 0 0" origin_xyz="0 0 0.5"
  parent="base_link" child="link_01"
  limit_e="1000" limit_l="-3.14" limit_u="3.14" limit_v="0.5" />

<m_link_mesh name="${link_01_name}"
  origin_rpy="0 0 0" origin_xyz="0 0 -0.1"
  mass="157.633"
  ixx="13.235" ixy="0" ixz="0"
  iyy="13.235" iyz="0"
  izz="9.655"
  meshfile="package://mrm_description/meshes/Link1-v2.stl"
  meshscale="0.001 0.001 0.001" />
)";

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  return s;
}

/// The excerpt with its properties substituted, wrapped in a robot element.
inline std::string macro_fragment_document() {
  std::string body = replace_all(kMacroFragment, "${link_00_name}", "base_link");
  body = replace_all(body, "${link_01_name}", "link_01");
  return "<robot name=\"mrm\">\n" + body + "</robot>\n";
}

}  // namespace armsim::fixtures

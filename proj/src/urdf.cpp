#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "twinlink/errors.hpp"
#include "twinlink/kinematics.hpp"

#include "twinlink/ur10_urdf.inc"

namespace twinlink::kinematics {

namespace {

namespace pt = boost::property_tree;

Eigen::Vector3d parse_vec3(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw ParseError("could not parse 3-vector from '" + text + "' in " + what);
  }
  return v;
}

struct RawJoint {
  std::string name;
  std::string type;
  std::string parent;
  std::string child;
  Eigen::Vector3d origin_xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d origin_rpy = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();  // URDF default
  std::optional<std::pair<double, double>> limits;

  Transformd origin() const { return Transformd::fromOriginRpy(origin_xyz, origin_rpy); }
};

RawJoint read_joint(const pt::ptree& node) {
  RawJoint j;
  j.name = node.get<std::string>("<xmlattr>.name", "");
  j.type = node.get<std::string>("<xmlattr>.type", "");
  if (auto parent = node.get_child_optional("parent")) {
    j.parent = parent->get<std::string>("<xmlattr>.link", "");
  }
  if (auto child = node.get_child_optional("child")) {
    j.child = child->get<std::string>("<xmlattr>.link", "");
  }
  if (auto origin = node.get_child_optional("origin")) {
    if (auto xyz = origin->get_optional<std::string>("<xmlattr>.xyz")) {
      j.origin_xyz = parse_vec3(*xyz, "joint '" + j.name + "' origin");
    }
    if (auto rpy = origin->get_optional<std::string>("<xmlattr>.rpy")) {
      j.origin_rpy = parse_vec3(*rpy, "joint '" + j.name + "' origin");
    }
  }
  if (auto axis = node.get_child_optional("axis")) {
    if (auto xyz = axis->get_optional<std::string>("<xmlattr>.xyz")) {
      j.axis = parse_vec3(*xyz, "joint '" + j.name + "' axis");
    }
  }
  if (auto limit = node.get_child_optional("limit")) {
    auto lo = limit->get_optional<double>("<xmlattr>.lower");
    auto hi = limit->get_optional<double>("<xmlattr>.upper");
    if (lo && hi) j.limits = {*lo, *hi};
  }
  return j;
}

// Number of revolute joints in the subtree rooted at `link`.
int count_revolute(const std::string& link,
                   const std::multimap<std::string, const RawJoint*>& by_parent) {
  int n = 0;
  auto range = by_parent.equal_range(link);
  for (auto it = range.first; it != range.second; ++it) {
    if (it->second->type == "revolute") ++n;
    n += count_revolute(it->second->child, by_parent);
  }
  return n;
}

}  // namespace

KinematicChain parse_urdf(const std::string& xml_text) {
  pt::ptree doc;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("URDF XML parse error at line " + std::to_string(e.line()) +
                     ": " + e.message());
  }

  auto robot = doc.get_child_optional("robot");
  if (!robot) throw StructureError("URDF has no <robot> element");

  KinematicChain chain;
  chain.name = robot->get<std::string>("<xmlattr>.name", "");

  std::set<std::string> links;
  std::vector<RawJoint> joints;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      std::string name = node.get<std::string>("<xmlattr>.name", "");
      if (name.empty()) throw StructureError("URDF link without a name");
      if (!links.insert(name).second) {
        throw StructureError("duplicate link name '" + name + "'");
      }
    } else if (tag == "joint") {
      RawJoint j = read_joint(node);
      if (j.type != "revolute" && j.type != "fixed") {
        throw UnsupportedError("unsupported joint type '" + j.type + "' on joint '" +
                               j.name + "' (only revolute and fixed are supported)");
      }
      joints.push_back(std::move(j));
    }
  }
  if (links.empty()) throw StructureError("URDF declares no links");

  std::set<std::string> children;
  std::multimap<std::string, const RawJoint*> by_parent;
  for (const auto& j : joints) {
    if (!links.count(j.parent)) {
      throw StructureError("joint '" + j.name + "' references unknown parent link '" +
                           j.parent + "'");
    }
    if (!links.count(j.child)) {
      throw StructureError("joint '" + j.name + "' references unknown child link '" +
                           j.child + "'");
    }
    children.insert(j.child);
    by_parent.emplace(j.parent, &j);
  }

  std::vector<std::string> roots;
  for (const auto& link : links) {
    if (!children.count(link)) roots.push_back(link);
  }
  if (roots.size() != 1) {
    throw StructureError("kinematic tree is disconnected or cyclic: found " +
                         std::to_string(roots.size()) + " root links, expected 1");
  }

  // Connectivity: every link must be reachable from the root.
  {
    std::set<std::string> seen{roots[0]};
    std::vector<std::string> stack{roots[0]};
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      auto range = by_parent.equal_range(cur);
      for (auto it = range.first; it != range.second; ++it) {
        if (seen.insert(it->second->child).second) stack.push_back(it->second->child);
      }
    }
    if (seen.size() != links.size()) {
      throw StructureError("kinematic tree is disconnected: " +
                           std::to_string(links.size() - seen.size()) +
                           " link(s) unreachable from root '" + roots[0] + "'");
    }
  }

  // Walk the unique root-to-tool path that carries every revolute joint.
  std::string current = roots[0];
  Transformd pending = Transformd::Identity();
  while (true) {
    auto range = by_parent.equal_range(current);
    std::vector<const RawJoint*> options(0);
    for (auto it = range.first; it != range.second; ++it) options.push_back(it->second);
    if (options.empty()) break;

    const RawJoint* next = nullptr;
    if (options.size() == 1) {
      next = options[0];
    } else {
      int branches_with_revolute = 0;
      for (const RawJoint* opt : options) {
        int n = (opt->type == "revolute" ? 1 : 0) + count_revolute(opt->child, by_parent);
        if (n > 0) {
          ++branches_with_revolute;
          next = opt;
        }
      }
      if (branches_with_revolute > 1) {
        throw StructureError("kinematic tree branches into multiple revolute chains at link '" +
                             current + "'");
      }
      if (branches_with_revolute == 0) break;  // ambiguous fixed tail: stop at this link
    }

    if (next->type == "fixed") {
      pending = pending * next->origin();
    } else {
      double axis_norm = next->axis.norm();
      if (axis_norm < 1e-12) {
        throw StructureError("joint '" + next->name + "' has a zero axis");
      }
      if (!next->limits) {
        throw StructureError("revolute joint '" + next->name + "' is missing a limit");
      }
      auto [lo, hi] = *next->limits;
      if (!(lo < hi)) {
        throw StructureError("joint '" + next->name + "' has invalid limits [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      ChainLink link;
      link.name = next->name;
      link.fixed_offset = pending * next->origin();
      link.axis = next->axis / axis_norm;
      link.limit_lo = lo;
      link.limit_hi = hi;
      chain.links.push_back(std::move(link));
      pending = Transformd::Identity();
    }
    current = next->child;
  }
  chain.tool_offset = pending;
  return chain;
}

KinematicChain parse_urdf_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open URDF file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_urdf(buf.str());
}

const char* ur10_urdf_text() { return kUr10UrdfText; }

KinematicChain ur10_chain() { return parse_urdf(kUr10UrdfText); }

}  // namespace twinlink::kinematics

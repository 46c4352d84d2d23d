#include "twinlink/kinematics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "twinlink/errors.hpp"

namespace twinlink::kinematics {

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);  // (-pi, pi), pi maps to -pi
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

double angle_diff(double a, double b) { return wrap_angle(a - b); }

JointConfig::JointConfig(const Vec6& angles) {
  if (!angles.allFinite()) {
    throw StructureError("joint configuration contains non-finite angles");
  }
  for (int i = 0; i < 6; ++i) angles_[i] = wrap_angle(angles[i]);
}

Vec6 JointConfig::wrapped_delta_from(const JointConfig& from) const {
  Vec6 d;
  for (int i = 0; i < 6; ++i) d[i] = angle_diff(angles_[i], from.angles_[i]);
  return d;
}

double JointConfig::max_wrapped_delta(const JointConfig& other) const {
  return wrapped_delta_from(other).cwiseAbs().maxCoeff();
}

Transformd forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
  Transformd pose = chain.base_transform;
  for (size_t i = 0; i < chain.links.size(); ++i) {
    pose = pose * chain.links[i].fixed_offset *
           Transformd::fromAngleAxis(q[static_cast<int>(i)], chain.links[i].axis);
  }
  return pose * chain.tool_offset;
}

std::vector<Eigen::Vector3d> joint_origins(const KinematicChain& chain,
                                           const JointConfig& q) {
  std::vector<Eigen::Vector3d> origins;
  origins.reserve(chain.links.size() + 1);
  Transformd pose = chain.base_transform;
  for (size_t i = 0; i < chain.links.size(); ++i) {
    pose = pose * chain.links[i].fixed_offset;
    origins.push_back(pose.translation());
    pose = pose * Transformd::fromAngleAxis(q[static_cast<int>(i)], chain.links[i].axis);
  }
  origins.push_back((pose * chain.tool_offset).translation());
  return origins;
}

bool within_limits(const KinematicChain& chain, const JointConfig& q) {
  for (size_t i = 0; i < chain.links.size(); ++i) {
    double a = q[static_cast<int>(i)];
    if (a < chain.links[i].limit_lo || a > chain.links[i].limit_hi) return false;
  }
  return true;
}

namespace {

nlohmann::ordered_json transform_to_json(const Transformd& t) {
  nlohmann::ordered_json j;
  j["xyz"] = {t.translation().x(), t.translation().y(), t.translation().z()};
  const auto& q = t.rotation();
  j["quat"] = {q.w(), q.x(), q.y(), q.z()};
  return j;
}

Transformd transform_from_json(const nlohmann::ordered_json& j) {
  auto xyz = j.at("xyz");
  auto quat = j.at("quat");
  Eigen::Quaterniond q(quat.at(0).get<double>(), quat.at(1).get<double>(),
                       quat.at(2).get<double>(), quat.at(3).get<double>());
  Eigen::Vector3d t(xyz.at(0).get<double>(), xyz.at(1).get<double>(),
                    xyz.at(2).get<double>());
  return Transformd(q, t);
}

}  // namespace

nlohmann::ordered_json chain_summary(const KinematicChain& chain) {
  nlohmann::ordered_json j;
  j["name"] = chain.name;
  j["base"] = transform_to_json(chain.base_transform);
  nlohmann::ordered_json joints = nlohmann::ordered_json::array();
  for (const auto& link : chain.links) {
    nlohmann::ordered_json lj;
    lj["name"] = link.name;
    lj["offset"] = transform_to_json(link.fixed_offset);
    lj["axis"] = {link.axis.x(), link.axis.y(), link.axis.z()};
    lj["limits"] = {link.limit_lo, link.limit_hi};
    joints.push_back(lj);
  }
  j["joints"] = joints;
  j["tool"] = transform_to_json(chain.tool_offset);
  return j;
}

KinematicChain chain_from_summary(const nlohmann::ordered_json& j) {
  KinematicChain chain;
  try {
    chain.name = j.at("name").get<std::string>();
    chain.base_transform = transform_from_json(j.at("base"));
    for (const auto& lj : j.at("joints")) {
      ChainLink link;
      link.name = lj.at("name").get<std::string>();
      link.fixed_offset = transform_from_json(lj.at("offset"));
      auto axis = lj.at("axis");
      link.axis = Eigen::Vector3d(axis.at(0).get<double>(), axis.at(1).get<double>(),
                                  axis.at(2).get<double>());
      link.limit_lo = lj.at("limits").at(0).get<double>();
      link.limit_hi = lj.at("limits").at(1).get<double>();
      chain.links.push_back(link);
    }
    chain.tool_offset = transform_from_json(j.at("tool"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("chain summary: ") + e.what());
  }
  return chain;
}

IkResult inverse_kinematics(const KinematicChain& chain, const Transformd& target) {
  return UrAnalyticIk(chain).solve(target);
}

}  // namespace twinlink::kinematics

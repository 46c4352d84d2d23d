#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace twinlink::bridge {

using Json = nlohmann::ordered_json;

enum class Op { advertise, unadvertise, publish, subscribe, unsubscribe };

std::string to_string(Op op);
/// Throws UnsupportedError carrying the op string for anything outside the
/// five supported ops.
Op op_from_string(const std::string& s);

/// rosbridge v2 envelope. Construct through the factories (or validate())
/// so the per-op invariants hold.
struct BridgeMessage {
  Op op = Op::publish;
  std::string topic;
  std::string msg_type;  // "type" on the wire; required for advertise/subscribe
  Json payload;          // "msg" on the wire; required for publish
  std::string id;        // optional

  static BridgeMessage advertise(std::string topic, std::string msg_type,
                                 std::string id = "");
  static BridgeMessage unadvertise(std::string topic, std::string id = "");
  static BridgeMessage publish(std::string topic, Json payload, std::string id = "");
  static BridgeMessage subscribe(std::string topic, std::string msg_type,
                                 std::string id = "");
  static BridgeMessage unsubscribe(std::string topic, std::string id = "");

  /// Throws StructureError on invariant violations.
  void validate() const;

  bool operator==(const BridgeMessage& rhs) const = default;
};

/// Single-line UTF-8 JSON, `op` first. Numbers round-trip exactly.
std::string encode(const BridgeMessage& msg);

/// Parses a rosbridge v2 envelope; unknown extra fields are ignored.
/// Throws ParseError (bad JSON), UnsupportedError (unknown op) or
/// SchemaError (missing required field, named in the message).
BridgeMessage decode(std::string_view bytes);

/// ROS-style timestamp. nsecs is kept in [0, 1e9).
struct TimeStamp {
  std::int64_t secs = 0;
  std::int32_t nsecs = 0;

  static TimeStamp from_seconds(double t);
  /// Exact when rate divides 1e9 (e.g. 125 Hz ticks).
  static TimeStamp from_ticks(std::int64_t tick, std::int64_t rate);
  double to_seconds() const;

  bool operator==(const TimeStamp&) const = default;
};

inline constexpr const char* kJointStateType = "sensor_msgs/JointState";
inline constexpr const char* kBoolType = "std_msgs/Bool";
inline constexpr const char* kTransformStampedType = "geometry_msgs/TransformStamped";

struct JointStateMsg {
  TimeStamp stamp;
  std::vector<std::string> name;
  std::vector<double> position;  // radians
  std::vector<double> velocity;  // rad/s, may be empty

  Json to_json() const;
  /// Validates |name| == |position|, unique names, nsecs range.
  static JointStateMsg from_json(const Json& j);
};

struct BoolMsg {
  bool data = false;

  Json to_json() const;
  static BoolMsg from_json(const Json& j);
};

struct TransformStampedMsg {
  TimeStamp stamp;
  std::string frame_id;
  std::string child_frame_id;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Json to_json() const;
  /// Validates rotation norm to 1e-6.
  static TransformStampedMsg from_json(const Json& j);
};

}  // namespace twinlink::bridge

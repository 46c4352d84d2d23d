#include "twinlink/bridge.hpp"

#include <cmath>
#include <set>

#include "twinlink/errors.hpp"

namespace twinlink::bridge {

std::string to_string(Op op) {
  switch (op) {
    case Op::advertise: return "advertise";
    case Op::unadvertise: return "unadvertise";
    case Op::publish: return "publish";
    case Op::subscribe: return "subscribe";
    case Op::unsubscribe: return "unsubscribe";
  }
  return "?";
}

Op op_from_string(const std::string& s) {
  if (s == "advertise") return Op::advertise;
  if (s == "unadvertise") return Op::unadvertise;
  if (s == "publish") return Op::publish;
  if (s == "subscribe") return Op::subscribe;
  if (s == "unsubscribe") return Op::unsubscribe;
  throw UnsupportedError("unsupported rosbridge op '" + s + "'");
}

void BridgeMessage::validate() const {
  if (topic.empty() || topic[0] != '/') {
    throw StructureError("topic must be non-empty and start with '/', got '" + topic +
                         "'");
  }
  if (op == Op::publish && payload.is_null()) {
    throw StructureError("publish on '" + topic + "' requires a msg payload");
  }
  if ((op == Op::advertise || op == Op::subscribe) && msg_type.empty()) {
    throw StructureError(to_string(op) + " on '" + topic + "' requires a msg type");
  }
}

BridgeMessage BridgeMessage::advertise(std::string topic, std::string msg_type,
                                       std::string id) {
  BridgeMessage m{Op::advertise, std::move(topic), std::move(msg_type), Json(),
                  std::move(id)};
  m.validate();
  return m;
}

BridgeMessage BridgeMessage::unadvertise(std::string topic, std::string id) {
  BridgeMessage m{Op::unadvertise, std::move(topic), "", Json(), std::move(id)};
  m.validate();
  return m;
}

BridgeMessage BridgeMessage::publish(std::string topic, Json payload, std::string id) {
  BridgeMessage m{Op::publish, std::move(topic), "", std::move(payload), std::move(id)};
  m.validate();
  return m;
}

BridgeMessage BridgeMessage::subscribe(std::string topic, std::string msg_type,
                                       std::string id) {
  BridgeMessage m{Op::subscribe, std::move(topic), std::move(msg_type), Json(),
                  std::move(id)};
  m.validate();
  return m;
}

BridgeMessage BridgeMessage::unsubscribe(std::string topic, std::string id) {
  BridgeMessage m{Op::unsubscribe, std::move(topic), "", Json(), std::move(id)};
  m.validate();
  return m;
}

std::string encode(const BridgeMessage& msg) {
  msg.validate();
  Json j;
  j["op"] = to_string(msg.op);
  if (!msg.id.empty()) j["id"] = msg.id;
  j["topic"] = msg.topic;
  if (!msg.msg_type.empty()) j["type"] = msg.msg_type;
  if (!msg.payload.is_null()) j["msg"] = msg.payload;
  return j.dump();
}

BridgeMessage decode(std::string_view bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON envelope: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("envelope is not a JSON object");
  if (!j.contains("op") || !j["op"].is_string()) {
    throw SchemaError("envelope missing required field 'op'");
  }
  BridgeMessage m;
  m.op = op_from_string(j["op"].get<std::string>());
  if (!j.contains("topic") || !j["topic"].is_string()) {
    throw SchemaError("envelope missing required field 'topic'");
  }
  m.topic = j["topic"].get<std::string>();
  if (j.contains("type")) m.msg_type = j["type"].get<std::string>();
  if (j.contains("id")) m.id = j["id"].get<std::string>();
  if (j.contains("msg")) m.payload = j["msg"];
  if (m.op == Op::publish && m.payload.is_null()) {
    throw SchemaError("publish envelope missing required field 'msg'");
  }
  if ((m.op == Op::advertise || m.op == Op::subscribe) && m.msg_type.empty()) {
    throw SchemaError(to_string(m.op) + " envelope missing required field 'type'");
  }
  m.validate();
  return m;
}

TimeStamp TimeStamp::from_seconds(double t) {
  double s = std::floor(t);
  auto nsecs = static_cast<std::int64_t>(std::llround((t - s) * 1e9));
  auto secs = static_cast<std::int64_t>(s);
  if (nsecs >= 1000000000) {
    secs += 1;
    nsecs -= 1000000000;
  }
  return {secs, static_cast<std::int32_t>(nsecs)};
}

TimeStamp TimeStamp::from_ticks(std::int64_t tick, std::int64_t rate) {
  std::int64_t secs = tick / rate;
  std::int64_t rem = tick % rate;
  if (rem < 0) {
    secs -= 1;
    rem += rate;
  }
  return {secs, static_cast<std::int32_t>(rem * 1000000000 / rate)};
}

double TimeStamp::to_seconds() const {
  return static_cast<double>(secs) + static_cast<double>(nsecs) / 1e9;
}

namespace {

Json stamp_to_json(const TimeStamp& s) {
  Json j;
  j["secs"] = s.secs;
  j["nsecs"] = s.nsecs;
  return j;
}

TimeStamp stamp_from_json(const Json& j) {
  TimeStamp s;
  s.secs = j.at("secs").get<std::int64_t>();
  s.nsecs = j.at("nsecs").get<std::int32_t>();
  if (s.nsecs < 0 || s.nsecs >= 1000000000) {
    throw SchemaError("stamp nsecs out of range [0, 1e9): " + std::to_string(s.nsecs));
  }
  return s;
}

}  // namespace

Json JointStateMsg::to_json() const {
  Json j;
  Json header;
  header["stamp"] = stamp_to_json(stamp);
  header["frame_id"] = "";
  j["header"] = header;
  j["name"] = name;
  j["position"] = position;
  j["velocity"] = velocity;
  return j;
}

JointStateMsg JointStateMsg::from_json(const Json& j) {
  JointStateMsg m;
  try {
    m.stamp = stamp_from_json(j.at("header").at("stamp"));
    m.name = j.at("name").get<std::vector<std::string>>();
    m.position = j.at("position").get<std::vector<double>>();
    if (j.contains("velocity")) m.velocity = j["velocity"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("JointState: ") + e.what());
  }
  if (m.name.size() != m.position.size()) {
    throw SchemaError("JointState name/position length mismatch: " +
                      std::to_string(m.name.size()) + " vs " +
                      std::to_string(m.position.size()));
  }
  std::set<std::string> unique(m.name.begin(), m.name.end());
  if (unique.size() != m.name.size()) {
    throw SchemaError("JointState joint names are not unique");
  }
  if (!m.velocity.empty() && m.velocity.size() != m.position.size()) {
    throw SchemaError("JointState velocity length mismatch");
  }
  return m;
}

Json BoolMsg::to_json() const {
  Json j;
  j["data"] = data;
  return j;
}

BoolMsg BoolMsg::from_json(const Json& j) {
  BoolMsg m;
  try {
    m.data = j.at("data").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("Bool: ") + e.what());
  }
  return m;
}

Json TransformStampedMsg::to_json() const {
  Json j;
  Json header;
  header["stamp"] = stamp_to_json(stamp);
  header["frame_id"] = frame_id;
  j["header"] = header;
  j["child_frame_id"] = child_frame_id;
  Json tf;
  Json tr;
  tr["x"] = translation.x();
  tr["y"] = translation.y();
  tr["z"] = translation.z();
  tf["translation"] = tr;
  Json rot;
  rot["x"] = rotation.x();
  rot["y"] = rotation.y();
  rot["z"] = rotation.z();
  rot["w"] = rotation.w();
  tf["rotation"] = rot;
  j["transform"] = tf;
  return j;
}

TransformStampedMsg TransformStampedMsg::from_json(const Json& j) {
  TransformStampedMsg m;
  try {
    m.stamp = stamp_from_json(j.at("header").at("stamp"));
    m.frame_id = j.at("header").at("frame_id").get<std::string>();
    m.child_frame_id = j.at("child_frame_id").get<std::string>();
    const auto& tr = j.at("transform").at("translation");
    m.translation =
        Eigen::Vector3d(tr.at("x").get<double>(), tr.at("y").get<double>(),
                        tr.at("z").get<double>());
    const auto& rot = j.at("transform").at("rotation");
    m.rotation = Eigen::Quaterniond(rot.at("w").get<double>(), rot.at("x").get<double>(),
                                    rot.at("y").get<double>(), rot.at("z").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("TransformStamped: ") + e.what());
  }
  if (std::abs(m.rotation.norm() - 1.0) > 1e-6) {
    throw SchemaError("TransformStamped rotation is not unit norm");
  }
  return m;
}

}  // namespace twinlink::bridge

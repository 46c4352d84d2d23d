#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "twinlink/bridge.hpp"

namespace twinlink::bridge {

struct BusStats {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;  // backpressure: oldest messages discarded
};

using MessageHandler = std::function<void(const BridgeMessage&)>;

/// One participant on a topic bus. Publish/subscribe semantics match
/// rosbridge: every published message reaches every current subscriber of the
/// topic exactly once, in per-(publisher, topic) order.
class BusEndpoint {
 public:
  virtual ~BusEndpoint() = default;
  virtual void advertise(const std::string& topic, const std::string& msg_type) = 0;
  virtual void unadvertise(const std::string& topic) = 0;
  virtual void subscribe(const std::string& topic, const std::string& msg_type,
                         MessageHandler handler) = 0;
  virtual void unsubscribe(const std::string& topic) = 0;
  virtual void publish(const std::string& topic, Json payload) = 0;
  virtual BusStats stats() const = 0;
};

/// In-process bus with lock-step delivery: published messages queue up and a
/// pump() call delivers them in global enqueue order. Fully deterministic.
class LoopbackBus {
 public:
  LoopbackBus();

  std::shared_ptr<BusEndpoint> make_endpoint();

  /// Delivers queued messages (including ones enqueued by handlers during the
  /// call) in enqueue order. Returns the number of deliveries made.
  std::size_t pump();

  BusStats stats() const;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace twinlink::bridge

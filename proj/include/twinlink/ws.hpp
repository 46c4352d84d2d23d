#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "twinlink/bus.hpp"

namespace twinlink::bridge {

/// rosbridge-style WebSocket bus server: accepts any number of concurrent
/// clients, routes published envelopes to every current subscriber of the
/// topic exactly once, preserving per-(publisher, topic) order. Subscriber
/// queues are bounded (default 1024); overflow drops the oldest message and
/// bumps the drop counter.
class WsServer {
 public:
  /// Binds and starts serving. port 0 picks an ephemeral port.
  /// Throws TransportError on bind failure.
  explicit WsServer(std::uint16_t port, std::size_t queue_capacity = 1024);
  ~WsServer();

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  std::uint16_t port() const;
  std::size_t client_count() const;
  BusStats stats() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// WebSocket client endpoint. Subscribe handlers run on the reader thread;
/// they must not block.
class WsClient : public BusEndpoint {
 public:
  /// Throws TransportError on connection or handshake failure.
  WsClient(const std::string& host, std::uint16_t port);
  ~WsClient() override;

  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  void advertise(const std::string& topic, const std::string& msg_type) override;
  void unadvertise(const std::string& topic) override;
  void subscribe(const std::string& topic, const std::string& msg_type,
                 MessageHandler handler) override;
  void unsubscribe(const std::string& topic) override;
  void publish(const std::string& topic, Json payload) override;
  BusStats stats() const override;

  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "ws://host:port" (or "host:port") into host and port.
/// Throws ParseError on malformed input.
std::pair<std::string, std::uint16_t> parse_ws_endpoint(const std::string& endpoint);

}  // namespace twinlink::bridge

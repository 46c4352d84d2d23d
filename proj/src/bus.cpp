#include "twinlink/bus.hpp"

#include <deque>
#include <map>
#include <vector>

#include "twinlink/errors.hpp"

namespace twinlink::bridge {

struct LoopbackBus::Impl {
  struct Subscriber {
    int endpoint_id;
    MessageHandler handler;
  };
  std::deque<BridgeMessage> queue;
  std::map<std::string, std::vector<Subscriber>> subscribers;  // subscription order
  BusStats stats;
  int next_endpoint_id = 0;
};

namespace {

class LoopbackEndpoint : public BusEndpoint {
 public:
  LoopbackEndpoint(std::shared_ptr<LoopbackBus::Impl> bus, int id)
      : bus_(std::move(bus)), id_(id) {}

  void advertise(const std::string& topic, const std::string& msg_type) override {
    BridgeMessage::advertise(topic, msg_type);  // validation only
  }

  void unadvertise(const std::string& topic) override {
    BridgeMessage::unadvertise(topic);
  }

  void subscribe(const std::string& topic, const std::string& msg_type,
                 MessageHandler handler) override {
    BridgeMessage::subscribe(topic, msg_type);
    bus_->subscribers[topic].push_back({id_, std::move(handler)});
  }

  void unsubscribe(const std::string& topic) override {
    auto it = bus_->subscribers.find(topic);
    if (it == bus_->subscribers.end()) return;
    std::erase_if(it->second, [this](const auto& s) { return s.endpoint_id == id_; });
  }

  void publish(const std::string& topic, Json payload) override {
    bus_->queue.push_back(BridgeMessage::publish(topic, std::move(payload)));
    ++bus_->stats.published;
    ++published_;
  }

  BusStats stats() const override {
    BusStats s = bus_->stats;
    s.published = published_;
    return s;
  }

 private:
  std::shared_ptr<LoopbackBus::Impl> bus_;
  int id_;
  std::uint64_t published_ = 0;
};

}  // namespace

LoopbackBus::LoopbackBus() : impl_(std::make_shared<Impl>()) {}

std::shared_ptr<BusEndpoint> LoopbackBus::make_endpoint() {
  return std::make_shared<LoopbackEndpoint>(impl_, impl_->next_endpoint_id++);
}

std::size_t LoopbackBus::pump() {
  std::size_t delivered = 0;
  while (!impl_->queue.empty()) {
    BridgeMessage msg = std::move(impl_->queue.front());
    impl_->queue.pop_front();
    auto it = impl_->subscribers.find(msg.topic);
    if (it == impl_->subscribers.end()) continue;
    // Handlers may subscribe/publish; iterate over a stable copy.
    auto subs = it->second;
    for (const auto& sub : subs) {
      sub.handler(msg);
      ++delivered;
      ++impl_->stats.delivered;
    }
  }
  return delivered;
}

BusStats LoopbackBus::stats() const { return impl_->stats; }

}  // namespace twinlink::bridge

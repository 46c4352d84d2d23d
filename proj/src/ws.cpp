#include "twinlink/ws.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "twinlink/errors.hpp"

namespace twinlink::bridge {

namespace {

constexpr const char* kWsGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxFrameBytes = 64u << 20;
constexpr std::uint8_t kOpText = 0x1;
constexpr std::uint8_t kOpBinary = 0x2;
constexpr std::uint8_t kOpClose = 0x8;
constexpr std::uint8_t kOpPing = 0x9;
constexpr std::uint8_t kOpPong = 0xA;

std::string base64(const unsigned char* data, std::size_t len) {
  std::string out(4 * ((len + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                          static_cast<int>(len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string websocket_accept_token(const std::string& key) {
  std::string input = key + kWsGuid;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_Digest(input.data(), input.size(), digest, &digest_len, EVP_sha1(), nullptr);
  return base64(digest, digest_len);
}

bool read_exact(int fd, void* buf, std::size_t len) {
  auto* p = static_cast<char*>(buf);
  while (len > 0) {
    ssize_t n = ::recv(fd, p, len, 0);
    if (n <= 0) return false;
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool write_all(int fd, const void* buf, std::size_t len) {
  const auto* p = static_cast<const char*>(buf);
  while (len > 0) {
    ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
    if (n <= 0) return false;
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

std::string make_frame(std::uint8_t opcode, std::string_view payload, bool mask,
                       std::uint32_t mask_key) {
  std::string frame;
  frame.reserve(payload.size() + 14);
  frame.push_back(static_cast<char>(0x80 | opcode));
  std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  if (payload.size() < 126) {
    frame.push_back(static_cast<char>(mask_bit | payload.size()));
  } else if (payload.size() <= 0xFFFF) {
    frame.push_back(static_cast<char>(mask_bit | 126));
    frame.push_back(static_cast<char>((payload.size() >> 8) & 0xFF));
    frame.push_back(static_cast<char>(payload.size() & 0xFF));
  } else {
    frame.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) {
      frame.push_back(static_cast<char>((static_cast<std::uint64_t>(payload.size()) >>
                                         shift) & 0xFF));
    }
  }
  if (mask) {
    char key[4] = {static_cast<char>((mask_key >> 24) & 0xFF),
                   static_cast<char>((mask_key >> 16) & 0xFF),
                   static_cast<char>((mask_key >> 8) & 0xFF),
                   static_cast<char>(mask_key & 0xFF)};
    frame.append(key, 4);
    std::size_t offset = frame.size();
    frame.append(payload);
    for (std::size_t i = 0; i < payload.size(); ++i) {
      frame[offset + i] = static_cast<char>(frame[offset + i] ^ key[i % 4]);
    }
  } else {
    frame.append(payload);
  }
  return frame;
}

struct Frame {
  std::uint8_t opcode = 0;
  std::string payload;
};

// Reads one complete message (handling ping/pong and continuation frames).
// Returns false on EOF or close.
bool read_message(int fd, std::string& out) {
  out.clear();
  std::uint8_t first_opcode = 0;
  while (true) {
    std::uint8_t header[2];
    if (!read_exact(fd, header, 2)) return false;
    bool fin = header[0] & 0x80;
    std::uint8_t opcode = header[0] & 0x0F;
    bool masked = header[1] & 0x80;
    std::uint64_t len = header[1] & 0x7F;
    if (len == 126) {
      std::uint8_t ext[2];
      if (!read_exact(fd, ext, 2)) return false;
      len = (static_cast<std::uint64_t>(ext[0]) << 8) | ext[1];
    } else if (len == 127) {
      std::uint8_t ext[8];
      if (!read_exact(fd, ext, 8)) return false;
      len = 0;
      for (int i = 0; i < 8; ++i) len = (len << 8) | ext[i];
    }
    if (len > kMaxFrameBytes) return false;
    std::uint8_t mask_key[4] = {0, 0, 0, 0};
    if (masked && !read_exact(fd, mask_key, 4)) return false;
    std::string payload(len, '\0');
    if (len > 0 && !read_exact(fd, payload.data(), len)) return false;
    if (masked) {
      for (std::uint64_t i = 0; i < len; ++i) {
        payload[i] = static_cast<char>(payload[i] ^ mask_key[i % 4]);
      }
    }

    if (opcode == kOpPing) {
      std::string pong = make_frame(kOpPong, payload, masked, 0);
      write_all(fd, pong.data(), pong.size());
      continue;
    }
    if (opcode == kOpPong) continue;
    if (opcode == kOpClose) {
      std::string close = make_frame(kOpClose, "", masked, 0);
      write_all(fd, close.data(), close.size());
      return false;
    }
    if (opcode == kOpText || opcode == kOpBinary) {
      first_opcode = opcode;
      out += payload;
    } else if (opcode == 0x0 && first_opcode != 0) {
      out += payload;
    } else {
      return false;  // protocol violation
    }
    if (fin) return true;
  }
}

// Reads an HTTP header block terminated by CRLFCRLF.
bool read_http_headers(int fd, std::string& out) {
  out.clear();
  char c;
  while (out.size() < 16384) {
    if (!read_exact(fd, &c, 1)) return false;
    out.push_back(c);
    if (out.size() >= 4 && out.compare(out.size() - 4, 4, "\r\n\r\n") == 0) return true;
  }
  return false;
}

std::string find_header(const std::string& headers, const std::string& name) {
  std::string lower;
  lower.reserve(headers.size());
  for (char ch : headers) lower.push_back(static_cast<char>(::tolower(ch)));
  std::string needle = "\r\n" + name + ":";
  auto pos = lower.find(needle);
  if (pos == std::string::npos) return "";
  pos += needle.size();
  auto end = headers.find("\r\n", pos);
  std::string value = headers.substr(pos, end - pos);
  auto first = value.find_first_not_of(" \t");
  auto last = value.find_last_not_of(" \t");
  if (first == std::string::npos) return "";
  return value.substr(first, last - first + 1);
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

struct WsServer::Impl {
  struct Conn {
    int fd = -1;
    std::thread reader;
    std::thread writer;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::shared_ptr<const std::string>> outbound;  // framed bytes
    bool closed = false;
    std::uint64_t dropped = 0;
  };

  int listen_fd = -1;
  std::uint16_t port = 0;
  std::size_t queue_capacity;
  std::thread acceptor;
  std::atomic<bool> stopping{false};

  std::mutex mu;  // guards conns, subscribers, stats
  std::vector<std::shared_ptr<Conn>> conns;
  std::map<std::string, std::vector<std::shared_ptr<Conn>>> subscribers;
  BusStats stats;

  void route(const BridgeMessage& msg) {
    auto framed = std::make_shared<const std::string>(
        make_frame(kOpText, encode(msg), false, 0));
    std::lock_guard lock(mu);
    ++stats.published;
    auto it = subscribers.find(msg.topic);
    if (it == subscribers.end()) return;
    for (auto& conn : it->second) {
      std::lock_guard conn_lock(conn->mu);
      if (conn->closed) continue;
      if (conn->outbound.size() >= queue_capacity) {
        conn->outbound.pop_front();
        ++conn->dropped;
        ++stats.dropped;
      }
      conn->outbound.push_back(framed);
      conn->cv.notify_one();
    }
  }

  // Unsubscribes a dying connection. The Conn entry itself stays in `conns`
  // until stop() so its reader thread can be joined.
  void remove_subscriptions(const std::shared_ptr<Conn>& conn) {
    std::lock_guard lock(mu);
    for (auto& [topic, subs] : subscribers) {
      std::erase(subs, conn);
    }
  }

  void writer_loop(std::shared_ptr<Conn> conn) {
    while (true) {
      std::shared_ptr<const std::string> next;
      {
        std::unique_lock lock(conn->mu);
        conn->cv.wait(lock, [&] { return conn->closed || !conn->outbound.empty(); });
        if (conn->closed && conn->outbound.empty()) return;
        next = conn->outbound.front();
        conn->outbound.pop_front();
      }
      if (!write_all(conn->fd, next->data(), next->size())) {
        std::lock_guard lock(conn->mu);
        conn->closed = true;
        return;
      }
      std::lock_guard lock(mu);
      ++stats.delivered;
    }
  }

  void reader_loop(std::shared_ptr<Conn> conn) {
    std::string headers;
    bool ok = read_http_headers(conn->fd, headers);
    std::string key = ok ? find_header(headers, "sec-websocket-key") : "";
    if (!ok || key.empty()) {
      finish_conn(conn);
      return;
    }
    std::string response =
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        "Sec-WebSocket-Accept: " + websocket_accept_token(key) + "\r\n\r\n";
    if (!write_all(conn->fd, response.data(), response.size())) {
      finish_conn(conn);
      return;
    }

    std::string message;
    while (read_message(conn->fd, message)) {
      BridgeMessage msg;
      try {
        msg = decode(message);
      } catch (const Error&) {
        continue;  // malformed input from a client does not kill the bus
      }
      switch (msg.op) {
        case Op::publish:
          route(msg);
          break;
        case Op::subscribe: {
          std::lock_guard lock(mu);
          auto& subs = subscribers[msg.topic];
          if (std::find(subs.begin(), subs.end(), conn) == subs.end()) {
            subs.push_back(conn);
          }
          break;
        }
        case Op::unsubscribe: {
          std::lock_guard lock(mu);
          auto it = subscribers.find(msg.topic);
          if (it != subscribers.end()) std::erase(it->second, conn);
          break;
        }
        case Op::advertise:
        case Op::unadvertise:
          break;  // tracked implicitly; routing does not depend on it
      }
    }
    finish_conn(conn);
  }

  void finish_conn(const std::shared_ptr<Conn>& conn) {
    remove_subscriptions(conn);
    {
      std::lock_guard lock(conn->mu);
      conn->closed = true;
      conn->cv.notify_all();
    }
    if (conn->writer.joinable()) conn->writer.join();
    ::close(conn->fd);
  }

  void accept_loop() {
    while (!stopping) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (stopping) break;
        continue;
      }
      set_nodelay(fd);
      auto conn = std::make_shared<Conn>();
      conn->fd = fd;
      {
        std::lock_guard lock(mu);
        conns.push_back(conn);
      }
      conn->writer = std::thread([this, conn] { writer_loop(conn); });
      conn->reader = std::thread([this, conn] { reader_loop(conn); });
    }
  }
};

WsServer::WsServer(std::uint16_t port, std::size_t queue_capacity)
    : impl_(std::make_unique<Impl>()) {
  impl_->queue_capacity = queue_capacity;
  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(impl_->listen_fd);
    throw TransportError("cannot bind WebSocket server to port " + std::to_string(port));
  }
  if (::listen(impl_->listen_fd, 64) < 0) {
    ::close(impl_->listen_fd);
    throw TransportError("listen() failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->port = ntohs(addr.sin_port);
  impl_->acceptor = std::thread([impl = impl_.get()] { impl->accept_loop(); });
}

WsServer::~WsServer() { stop(); }

std::uint16_t WsServer::port() const { return impl_->port; }

std::size_t WsServer::client_count() const {
  std::lock_guard lock(impl_->mu);
  std::size_t n = 0;
  for (const auto& conn : impl_->conns) {
    std::lock_guard conn_lock(conn->mu);
    if (!conn->closed) ++n;
  }
  return n;
}

BusStats WsServer::stats() const {
  std::lock_guard lock(impl_->mu);
  return impl_->stats;
}

void WsServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  ::shutdown(impl_->listen_fd, SHUT_RDWR);
  ::close(impl_->listen_fd);
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  std::vector<std::shared_ptr<Impl::Conn>> conns;
  {
    std::lock_guard lock(impl_->mu);
    conns = impl_->conns;
  }
  for (auto& conn : conns) {
    std::lock_guard conn_lock(conn->mu);
    if (!conn->closed) ::shutdown(conn->fd, SHUT_RDWR);
  }
  for (auto& conn : conns) {
    if (conn->reader.joinable()) conn->reader.join();
  }
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct WsClient::Impl {
  int fd = -1;
  std::thread reader;
  std::atomic<bool> closed{false};

  std::mutex write_mu;
  std::mt19937 mask_rng{0x51a7e57u};

  mutable std::mutex handler_mu;
  std::map<std::string, MessageHandler> handlers;

  mutable std::mutex stats_mu;
  BusStats stats;

  void send_envelope(const BridgeMessage& msg) {
    std::string payload = encode(msg);
    std::lock_guard lock(write_mu);
    if (closed) throw TransportError("WebSocket client is closed");
    std::string frame = make_frame(kOpText, payload, true, mask_rng());
    if (!write_all(fd, frame.data(), frame.size())) {
      closed = true;
      throw TransportError("WebSocket send failed (connection lost)");
    }
  }

  void reader_loop() {
    std::string message;
    while (!closed && read_message(fd, message)) {
      BridgeMessage msg;
      try {
        msg = decode(message);
      } catch (const Error&) {
        continue;
      }
      if (msg.op != Op::publish) continue;
      MessageHandler handler;
      {
        std::lock_guard lock(handler_mu);
        auto it = handlers.find(msg.topic);
        if (it != handlers.end()) handler = it->second;
      }
      if (handler) {
        handler(msg);
        std::lock_guard lock(stats_mu);
        ++stats.delivered;
      }
    }
    closed = true;
  }
};

WsClient::WsClient(const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve host '" + host + "'");
  }
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw TransportError("socket() failed");
  }
  if (::connect(fd, res->ai_addr, res->ai_addrlen) < 0) {
    ::freeaddrinfo(res);
    ::close(fd);
    throw TransportError("connection refused: " + host + ":" + port_str);
  }
  ::freeaddrinfo(res);
  set_nodelay(fd);

  unsigned char key_bytes[16];
  std::mt19937 rng(static_cast<unsigned>(::getpid()) * 2654435761u + port);
  for (auto& b : key_bytes) b = static_cast<unsigned char>(rng() & 0xFF);
  std::string key = base64(key_bytes, sizeof(key_bytes));
  std::string request =
      "GET / HTTP/1.1\r\n"
      "Host: " + host + ":" + port_str + "\r\n"
      "Upgrade: websocket\r\n"
      "Connection: Upgrade\r\n"
      "Sec-WebSocket-Key: " + key + "\r\n"
      "Sec-WebSocket-Version: 13\r\n\r\n";
  if (!write_all(fd, request.data(), request.size())) {
    ::close(fd);
    throw TransportError("WebSocket handshake send failed");
  }
  std::string response;
  if (!read_http_headers(fd, response) || response.find(" 101 ") == std::string::npos ||
      find_header(response, "sec-websocket-accept") != websocket_accept_token(key)) {
    ::close(fd);
    throw TransportError("WebSocket handshake rejected by server");
  }

  impl_->fd = fd;
  impl_->reader = std::thread([impl = impl_.get()] { impl->reader_loop(); });
}

WsClient::~WsClient() { close(); }

void WsClient::advertise(const std::string& topic, const std::string& msg_type) {
  impl_->send_envelope(BridgeMessage::advertise(topic, msg_type));
}

void WsClient::unadvertise(const std::string& topic) {
  impl_->send_envelope(BridgeMessage::unadvertise(topic));
}

void WsClient::subscribe(const std::string& topic, const std::string& msg_type,
                         MessageHandler handler) {
  {
    std::lock_guard lock(impl_->handler_mu);
    impl_->handlers[topic] = std::move(handler);
  }
  impl_->send_envelope(BridgeMessage::subscribe(topic, msg_type));
}

void WsClient::unsubscribe(const std::string& topic) {
  {
    std::lock_guard lock(impl_->handler_mu);
    impl_->handlers.erase(topic);
  }
  impl_->send_envelope(BridgeMessage::unsubscribe(topic));
}

void WsClient::publish(const std::string& topic, Json payload) {
  impl_->send_envelope(BridgeMessage::publish(topic, std::move(payload)));
  std::lock_guard lock(impl_->stats_mu);
  ++impl_->stats.published;
}

BusStats WsClient::stats() const {
  std::lock_guard lock(impl_->stats_mu);
  return impl_->stats;
}

void WsClient::close() {
  if (impl_->closed.exchange(true)) {
    if (impl_->reader.joinable()) impl_->reader.join();
    return;
  }
  {
    std::lock_guard lock(impl_->write_mu);
    std::string frame = make_frame(kOpClose, "", true, impl_->mask_rng());
    write_all(impl_->fd, frame.data(), frame.size());
  }
  ::shutdown(impl_->fd, SHUT_RDWR);
  if (impl_->reader.joinable()) impl_->reader.join();
  ::close(impl_->fd);
}

std::pair<std::string, std::uint16_t> parse_ws_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  if (rest.rfind("ws://", 0) == 0) rest = rest.substr(5);
  auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= rest.size()) {
    throw ParseError("expected ws://host:port, got '" + endpoint + "'");
  }
  std::string host = rest.substr(0, colon);
  std::string port_str = rest.substr(colon + 1);
  // Trailing path components are not supported.
  if (auto slash = port_str.find('/'); slash != std::string::npos) {
    port_str = port_str.substr(0, slash);
  }
  int port = 0;
  try {
    port = std::stoi(port_str);
  } catch (const std::exception&) {
    throw ParseError("invalid port in endpoint '" + endpoint + "'");
  }
  if (port <= 0 || port > 65535) {
    throw ParseError("port out of range in endpoint '" + endpoint + "'");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

}  // namespace twinlink::bridge

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <list>
#include <map>
#include <mutex>
#include <thread>

#include "qsor/error.hpp"
#include "qsor/transport.hpp"

namespace qsor {
namespace {

std::string endpoint_string(const sockaddr_in& addr) {
  char host[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &addr.sin_addr, host, sizeof(host));
  return std::string(host) + ":" + std::to_string(ntohs(addr.sin_port));
}

sockaddr_in parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_argument, "expected host:port, got " + text);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  const std::string host = text.substr(0, colon);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(Errc::invalid_argument, "bad IPv4 host in " + text);
  }
  unsigned long port = 0;
  try {
    port = std::stoul(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "bad port in " + text);
  }
  if (port > 0xffff) throw Error(Errc::invalid_argument, "bad port in " + text);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  return addr;
}

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

struct TcpTransport::Impl {
  struct Connection {
    int fd = -1;
    std::string peer;
    std::mutex write_mutex;
    std::thread reader;
  };

  std::string address;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::thread acceptor;

  std::mutex conn_mutex;
  std::list<Connection> connections;
  std::map<std::string, Connection*> by_peer;

  std::mutex inbox_mutex;
  std::condition_variable inbox_ready;
  std::deque<Delivery> inbox;

  // Requires conn_mutex.
  Connection& adopt(int fd, const std::string& peer) {
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto& c = connections.emplace_back();
    c.fd = fd;
    c.peer = peer;
    by_peer[peer] = &c;
    c.reader = std::thread([this, &c] { read_loop(c); });
    return c;
  }

  void read_loop(Connection& c) {
    Cell::Wire wire{};
    while (!stopping.load() && read_all(c.fd, wire.data(), wire.size())) {
      try {
        Delivery d{c.peer, Cell::parse(wire)};
        {
          std::lock_guard lock(inbox_mutex);
          inbox.push_back(std::move(d));
        }
        inbox_ready.notify_one();
      } catch (const Error&) {
        // Unparseable cell: drop it and keep the stream.
      }
    }
  }

  void accept_loop() {
    while (!stopping.load()) {
      pollfd p{listen_fd, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      sockaddr_in peer{};
      socklen_t len = sizeof(peer);
      const int fd = ::accept(listen_fd, reinterpret_cast<sockaddr*>(&peer), &len);
      if (fd < 0) continue;
      std::lock_guard lock(conn_mutex);
      if (stopping.load()) {
        ::close(fd);
        break;
      }
      adopt(fd, endpoint_string(peer));
    }
  }

  Connection& connection_to(const std::string& to) {
    std::lock_guard lock(conn_mutex);
    if (auto it = by_peer.find(to); it != by_peer.end()) return *it->second;
    const auto addr = parse_endpoint(to);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Errc::io_error, std::string("socket: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
      const int err = errno;
      ::close(fd);
      throw Error(Errc::delivery_failure, "connect " + to + ": " + std::strerror(err));
    }
    return adopt(fd, to);
  }
};

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  auto addr = parse_endpoint(host + ":" + std::to_string(port));
  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw Error(Errc::io_error, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(impl_->listen_fd, 64) != 0) {
    const int err = errno;
    ::close(impl_->listen_fd);
    throw Error(Errc::io_error, "bind/listen " + host + ": " + std::strerror(err));
  }
  socklen_t len = sizeof(addr);
  getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->address = endpoint_string(addr);
  impl_->acceptor = std::thread([impl = impl_.get()] { impl->accept_loop(); });
}

TcpTransport::~TcpTransport() {
  impl_->stopping.store(true);
  impl_->acceptor.join();
  ::close(impl_->listen_fd);
  std::lock_guard lock(impl_->conn_mutex);
  for (auto& c : impl_->connections) ::shutdown(c.fd, SHUT_RDWR);
  for (auto& c : impl_->connections) {
    c.reader.join();
    ::close(c.fd);
  }
}

const std::string& TcpTransport::address() const noexcept { return impl_->address; }

void TcpTransport::send(const std::string& to, const Cell& cell) {
  auto& c = impl_->connection_to(to);
  const auto wire = cell.serialize();
  std::lock_guard lock(c.write_mutex);
  if (!write_all(c.fd, wire.data(), wire.size())) {
    throw Error(Errc::delivery_failure, "write to " + to + " failed");
  }
}

std::optional<Delivery> TcpTransport::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->inbox_mutex);
  if (!impl_->inbox_ready.wait_for(lock, timeout, [&] { return !impl_->inbox.empty(); })) {
    return std::nullopt;
  }
  auto d = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return d;
}

}  // namespace qsor

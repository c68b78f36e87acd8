#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "qsor/cell.hpp"

namespace qsor {

struct Delivery {
  std::string peer;  // sender as seen by the receiving endpoint
  Cell cell;
};

// A bidirectional endpoint moving 512-byte cells. send() may be called from
// any thread; receive() from one consumer thread.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual const std::string& address() const noexcept = 0;
  virtual void send(const std::string& to, const Cell& cell) = 0;
  virtual std::optional<Delivery> receive(std::chrono::milliseconds timeout) = 0;
};

// Fragments `message` and sends every cell to `to`.
void send_message(Transport& transport, const std::string& to, ByteView message,
                  std::uint32_t circuit_id);

// Shared in-memory switch. Endpoints are addressed by name. Cells cross the
// switch in serialized form and are re-parsed on receipt.
class InProcessNetwork {
 public:
  // Called on every cell in flight; may modify the wire bytes.
  using WireHook = std::function<void(const std::string& from, const std::string& to,
                                      Cell::Wire& wire)>;

  InProcessNetwork();
  ~InProcessNetwork();
  InProcessNetwork(const InProcessNetwork&) = delete;
  InProcessNetwork& operator=(const InProcessNetwork&) = delete;

  // Throws invalid_argument if the address is already bound.
  std::unique_ptr<Transport> endpoint(const std::string& address);

  void set_wire_hook(WireHook hook);
  std::uint64_t cells_sent() const noexcept;
  std::uint64_t cells_rejected() const noexcept;

  struct Hub;

 private:
  std::shared_ptr<Hub> hub_;
};

// TCP endpoint: raw 512-byte cells written back-to-back, no extra framing.
// Addresses are "host:port". A connection accepted from a peer is reused for
// replies to that peer.
class TcpTransport final : public Transport {
 public:
  // Port 0 picks an ephemeral port; address() reports the bound one.
  explicit TcpTransport(const std::string& host = "127.0.0.1", std::uint16_t port = 0);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  const std::string& address() const noexcept override;
  void send(const std::string& to, const Cell& cell) override;
  std::optional<Delivery> receive(std::chrono::milliseconds timeout) override;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace qsor

#include "qsor/transport.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>

#include "qsor/error.hpp"

namespace qsor {

void send_message(Transport& transport, const std::string& to, ByteView message,
                  std::uint32_t circuit_id) {
  for (const auto& cell : fragment(message, circuit_id)) transport.send(to, cell);
}

namespace {

struct Mailbox {
  std::mutex mutex;
  std::condition_variable ready;
  std::deque<std::pair<std::string, Cell::Wire>> queue;
};

}  // namespace

struct InProcessNetwork::Hub {
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<Mailbox>> mailboxes;
  WireHook hook;
  std::atomic<std::uint64_t> sent{0};
  std::atomic<std::uint64_t> rejected{0};
};

namespace {

class InProcessEndpoint final : public Transport {
 public:
  InProcessEndpoint(std::shared_ptr<InProcessNetwork::Hub> hub, std::string address,
                    std::shared_ptr<Mailbox> box)
      : hub_(std::move(hub)), address_(std::move(address)), box_(std::move(box)) {}

  ~InProcessEndpoint() override {
    std::lock_guard lock(hub_->mutex);
    hub_->mailboxes.erase(address_);
  }

  const std::string& address() const noexcept override { return address_; }

  void send(const std::string& to, const Cell& cell) override {
    std::shared_ptr<Mailbox> dest;
    InProcessNetwork::WireHook hook;
    {
      std::lock_guard lock(hub_->mutex);
      auto it = hub_->mailboxes.find(to);
      if (it == hub_->mailboxes.end()) {
        throw Error(Errc::delivery_failure, "no endpoint at " + to);
      }
      dest = it->second;
      hook = hub_->hook;
    }
    auto wire = cell.serialize();
    if (hook) hook(address_, to, wire);
    ++hub_->sent;
    {
      std::lock_guard lock(dest->mutex);
      dest->queue.emplace_back(address_, wire);
    }
    dest->ready.notify_one();
  }

  std::optional<Delivery> receive(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::unique_lock lock(box_->mutex);
    for (;;) {
      if (!box_->ready.wait_until(lock, deadline, [&] { return !box_->queue.empty(); })) {
        return std::nullopt;
      }
      auto [peer, wire] = std::move(box_->queue.front());
      box_->queue.pop_front();
      try {
        return Delivery{std::move(peer), Cell::parse(wire)};
      } catch (const Error&) {
        ++hub_->rejected;
      }
    }
  }

 private:
  std::shared_ptr<InProcessNetwork::Hub> hub_;
  std::string address_;
  std::shared_ptr<Mailbox> box_;
};

}  // namespace

InProcessNetwork::InProcessNetwork() : hub_(std::make_shared<Hub>()) {}
InProcessNetwork::~InProcessNetwork() = default;

std::unique_ptr<Transport> InProcessNetwork::endpoint(const std::string& address) {
  if (address.empty()) throw Error(Errc::invalid_argument, "endpoint address is empty");
  auto box = std::make_shared<Mailbox>();
  {
    std::lock_guard lock(hub_->mutex);
    if (!hub_->mailboxes.emplace(address, box).second) {
      throw Error(Errc::invalid_argument, "address already bound: " + address);
    }
  }
  return std::make_unique<InProcessEndpoint>(hub_, address, std::move(box));
}

void InProcessNetwork::set_wire_hook(WireHook hook) {
  std::lock_guard lock(hub_->mutex);
  hub_->hook = std::move(hook);
}

std::uint64_t InProcessNetwork::cells_sent() const noexcept { return hub_->sent.load(); }
std::uint64_t InProcessNetwork::cells_rejected() const noexcept { return hub_->rejected.load(); }

}  // namespace qsor

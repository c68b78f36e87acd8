#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <vector>

#include "qsor/cell.hpp"
#include "qsor/error.hpp"
#include "qsor/onion.hpp"
#include "qsor/transport.hpp"

namespace qsor {

// Append-only, thread-safe line log.
class RelayLog {
 public:
  void write(std::string line);
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

using ExitSink =
    std::function<void(std::uint32_t circuit_id, const std::string& from, Bytes payload)>;
// Invoked when a circuit is dropped because a layer failed to open.
using DropObserver = std::function<void(std::uint32_t circuit_id, Errc reason)>;

struct RelayState {
  std::string nickname;
  const SchemeRegistry* registry = &SchemeRegistry::builtin();
  NodeKeys keys;
  Reassembler reassembler{{std::chrono::milliseconds(5000), true}};
  std::map<std::uint32_t, std::string> forwarding;  // circuit -> next hop
  std::shared_ptr<RelayLog> log = std::make_shared<RelayLog>();
  ExitSink exit_sink;
  DropObserver on_drop;

  std::uint64_t layers_removed = 0;
  std::uint64_t circuits_dropped = 0;
  std::uint64_t cells_dropped = 0;
};

// Processes one received cell: reassembles, peels a layer once a message is
// complete, then forwards the inner bytes on the same circuit or hands them
// to the exit sink.
void relay_handle(RelayState& state, Transport& transport, const Delivery& delivery);

// Runs relay_handle on every received cell until `stop` is requested.
void relay_loop(RelayState& state, Transport& transport, std::stop_token stop);

}  // namespace qsor

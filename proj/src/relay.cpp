#include "qsor/relay.hpp"

#include <cstdio>

#include "qsor/error.hpp"

namespace qsor {
namespace {

std::string circuit_label(std::uint32_t id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", id);
  return buf;
}

}  // namespace

void RelayLog::write(std::string line) {
  std::lock_guard lock(mutex_);
  lines_.push_back(std::move(line));
}

std::vector<std::string> RelayLog::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

void relay_handle(RelayState& state, Transport& transport, const Delivery& delivery) {
  const auto& cell = delivery.cell;
  const std::string prefix = "[" + state.nickname + "] circuit " + circuit_label(cell.circuit_id);
  if (cell.circuit_id == kDirectoryCircuit) {
    ++state.cells_dropped;
    return;
  }
  auto res = state.reassembler.accept(delivery.peer, cell);
  if (res.outcome == Reassembler::Outcome::dropped) {
    ++state.cells_dropped;
    state.log->write(prefix + ": dropped cell seq " + std::to_string(cell.seq) + " from " +
                     delivery.peer + ": unknown circuit");
    return;
  }
  if (res.outcome != Reassembler::Outcome::complete) return;

  LayerPlaintext layer;
  try {
    layer = unwrap_layer(*state.registry, state.keys, res.message);
  } catch (const Error& e) {
    ++state.circuits_dropped;
    state.forwarding.erase(cell.circuit_id);
    state.log->write(prefix + ": dropped circuit from " + delivery.peer + ": " +
                     errc_name(e.code()));
    if (state.on_drop) state.on_drop(cell.circuit_id, e.code());
    return;
  }
  ++state.layers_removed;

  if (layer.next_hop.empty()) {
    state.log->write(prefix + ": exit, from " + delivery.peer + ", delivering " +
                     std::to_string(layer.inner.size()) + " bytes");
    if (state.exit_sink) state.exit_sink(cell.circuit_id, delivery.peer, std::move(layer.inner));
    return;
  }
  state.forwarding[cell.circuit_id] = layer.next_hop;
  state.log->write(prefix + ": layer removed, from " + delivery.peer + " to " + layer.next_hop +
                   ", " + std::to_string(layer.inner.size()) + " bytes");
  try {
    if (layer.inner.empty()) throw Error(Errc::malformed, "empty inner layer");
    send_message(transport, layer.next_hop, layer.inner, cell.circuit_id);
  } catch (const Error& e) {
    ++state.circuits_dropped;
    state.forwarding.erase(cell.circuit_id);
    state.log->write(prefix + ": forward to " + layer.next_hop + " failed: " + e.what());
    if (state.on_drop) state.on_drop(cell.circuit_id, e.code());
  }
}

void relay_loop(RelayState& state, Transport& transport, std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto delivery = transport.receive(std::chrono::milliseconds(50));
    if (const auto expired = state.reassembler.expire(); expired > 0) {
      state.log->write("[" + state.nickname + "] expired " + std::to_string(expired) +
                       " incomplete circuit buffer(s)");
    }
    if (delivery) relay_handle(state, transport, *delivery);
  }
}

}  // namespace qsor

#include "qsor/simulate.hpp"

#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

#include "qsor/error.hpp"
#include "qsor/relay.hpp"

namespace qsor {
namespace {

std::unique_ptr<Rng> make_rng(const SimulationConfig& config, std::uint64_t stream) {
  if (!config.seeded) return std::make_unique<SystemRng>();
  // Distinct deterministic stream per participant.
  return std::make_unique<SeededRng>(config.seed * 0x9e3779b97f4a7c15ULL + stream);
}

struct ExitMailbox {
  std::mutex mutex;
  std::condition_variable changed;
  std::optional<Bytes> payload;
  bool dropped = false;
};

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config) {
  const auto& registry = *config.registry;
  const auto policy =
      MigrationPolicy::for_protocol(config.protocol, config.classical, config.post_quantum);
  policy.validate(registry);
  if (config.hops == 0) throw Error(Errc::empty_path, "hop count must be at least 1");
  const std::size_t needed = std::max(kMinConsensusRelays, config.hops);
  if (config.nodes < needed) {
    throw Error(Errc::insufficient_relays, "insufficient relays: " + std::to_string(config.nodes) +
                                               " requested, at least " + std::to_string(needed) +
                                               " required");
  }
  if (config.tamper_hop && (*config.tamper_hop == 0 || *config.tamper_hop > config.hops)) {
    throw Error(Errc::invalid_argument, "tamper hop out of range");
  }
  if (config.tamper_hop && config.transport != TransportKind::inproc) {
    throw Error(Errc::invalid_argument, "fault injection needs the in-process transport");
  }

  std::unique_ptr<InProcessNetwork> network;
  auto make_endpoint = [&](const std::string& name) -> std::unique_ptr<Transport> {
    if (config.transport == TransportKind::tcp) return std::make_unique<TcpTransport>();
    return network->endpoint(name);
  };
  if (config.transport == TransportKind::inproc) network = std::make_unique<InProcessNetwork>();

  SimulationResult result;
  auto client_rng = make_rng(config, 0);

  DirectoryStore store(registry);
  auto dir_transport = make_endpoint(std::string(kDirectoryAddress));
  std::jthread directory_thread(
      [&](std::stop_token stop) { serve_directory(store, *dir_transport, stop); });

  auto client = make_endpoint(std::string(kClientAddress));

  ExitMailbox exit_box;
  std::vector<std::unique_ptr<Transport>> relay_transports;
  std::vector<std::unique_ptr<RelayState>> relays;
  for (std::size_t i = 0; i < config.nodes; ++i) {
    const std::string nickname = "relay" + std::to_string(i + 1);
    auto transport = make_endpoint(nickname);
    auto rng = make_rng(config, i + 1);

    auto state = std::make_unique<RelayState>();
    state->nickname = nickname;
    state->registry = &registry;
    state->keys.classical = keygen(registry, config.classical, *rng);
    state->keys.post_quantum = keygen(registry, config.post_quantum, *rng);

    NodeDescriptor d;
    d.nickname = nickname;
    d.address = transport->address();
    d.onion_key.classical = state->keys.classical->public_key;
    d.onion_key.post_quantum = state->keys.post_quantum->public_key;
    d.published_at = 1;
    publish_remote(*transport, dir_transport->address(), d);

    state->exit_sink = [&exit_box](std::uint32_t, const std::string&, Bytes payload) {
      {
        std::lock_guard lock(exit_box.mutex);
        exit_box.payload = std::move(payload);
      }
      exit_box.changed.notify_all();
    };
    state->on_drop = [&exit_box](std::uint32_t, Errc) {
      {
        std::lock_guard lock(exit_box.mutex);
        exit_box.dropped = true;
      }
      exit_box.changed.notify_all();
    };
    relay_transports.push_back(std::move(transport));
    relays.push_back(std::move(state));
  }

  const auto consensus = fetch_consensus(registry, *client, dir_transport->address(), 1);
  result.trace.push_back("client: consensus epoch " + std::to_string(consensus.epoch) + " lists " +
                         std::to_string(consensus.nodes.size()) + " relays");

  const auto path = select_path(consensus, policy, *client_rng, config.hops);
  std::string route;
  for (const auto& hop : path) {
    result.path.push_back(hop.address);
    route += (route.empty() ? "" : " -> ") + hop.address;
  }

  {
    std::vector<std::jthread> relay_threads;
    for (std::size_t i = 0; i < relays.size(); ++i) {
      relay_threads.emplace_back([&, i](std::stop_token stop) {
        relay_loop(*relays[i], *relay_transports[i], stop);
      });
    }

    const auto onion = wrap(registry, config.payload, path, config.protocol, *client_rng);
    result.onion_size = onion.bytes.size();
    do {
      result.circuit_id = static_cast<std::uint32_t>(client_rng->next_u64());
    } while (result.circuit_id == kDirectoryCircuit);

    if (config.tamper_hop) {
      const std::string target = path[*config.tamper_hop - 1].address;
      const auto circuit = result.circuit_id;
      auto flipped = std::make_shared<bool>(false);
      auto tamper_rng = std::shared_ptr<Rng>(make_rng(config, 0xfa017));
      network->set_wire_hook([=](const std::string&, const std::string& to, Cell::Wire& wire) {
        if (*flipped || to != target || get_u32(wire.data()) != circuit) return;
        const std::size_t frag_len = get_u16(wire.data() + 8);
        const auto bit = tamper_rng->uniform(frag_len * 8);
        wire[kCellHeaderSize + bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        *flipped = true;
      });
    }

    result.cells_sent = packets_needed_transport_metric(onion.bytes.size());
    result.trace.push_back("client: wrapped " + std::string(protocol_name(config.protocol)) +
                           " onion of " + std::to_string(onion.bytes.size()) + " bytes (" +
                           std::to_string(result.cells_sent) + " cells) over " + route);
    send_message(*client, path.front().address, onion.bytes, result.circuit_id);

    std::unique_lock lock(exit_box.mutex);
    exit_box.changed.wait_for(lock, config.delivery_timeout,
                              [&] { return exit_box.payload.has_value() || exit_box.dropped; });
    if (exit_box.payload) {
      result.received = *exit_box.payload;
      result.delivered = result.received == config.payload;
    }
    lock.unlock();
    // relay_threads stop and join here.
  }
  directory_thread.request_stop();
  directory_thread.join();

  for (std::size_t i = 0; i < relays.size(); ++i) {
    const auto lines = relays[i]->log->lines();
    result.relay_logs[relay_transports[i]->address()] = lines;
    result.circuits_dropped += relays[i]->circuits_dropped;
  }
  for (const auto& address : result.path) {
    for (const auto& line : result.relay_logs[address]) result.trace.push_back(line);
  }
  result.trace.push_back(result.delivered ? "client: payload delivered at exit"
                                          : "client: payload NOT delivered");
  return result;
}

}  // namespace qsor

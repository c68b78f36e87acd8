#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsor/directory.hpp"
#include "qsor/onion.hpp"

namespace qsor {

enum class TransportKind : std::uint8_t { inproc, tcp };

struct SimulationConfig {
  const SchemeRegistry* registry = &SchemeRegistry::builtin();
  std::size_t nodes = 6;
  std::size_t hops = kDefaultHops;
  Protocol protocol = Protocol::qso;
  SchemeId classical = schemes::rsa2048;
  SchemeId post_quantum = schemes::kyber512;
  Bytes payload;
  TransportKind transport = TransportKind::inproc;
  std::uint64_t seed = 0;
  bool seeded = false;
  // Flip one bit in the first cell sent to this hop (1-based). In-process only.
  std::optional<std::size_t> tamper_hop;
  std::chrono::milliseconds delivery_timeout{5000};
};

struct SimulationResult {
  bool delivered = false;
  Bytes received;
  std::uint32_t circuit_id = 0;
  std::vector<std::string> path;  // relay addresses, entry first
  std::size_t onion_size = 0;
  std::size_t cells_sent = 0;
  std::uint64_t circuits_dropped = 0;
  std::vector<std::string> trace;
  std::map<std::string, std::vector<std::string>> relay_logs;  // by address
};

inline constexpr std::string_view kClientAddress = "client";
inline constexpr std::string_view kDirectoryAddress = "directory";

// Spins up a directory and `nodes` relays, publishes descriptors, fetches the
// consensus, selects a path, sends one onion and waits for it at the exit.
// Throws insufficient_relays when nodes < max(3, hops).
SimulationResult run_simulation(const SimulationConfig& config);

}  // namespace qsor

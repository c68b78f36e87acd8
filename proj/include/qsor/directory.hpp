#pragma once

// Single-authority directory: relays publish descriptors, the authority
// snapshots them into a consensus, clients sample paths from the consensus.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <vector>

#include "qsor/kem.hpp"
#include "qsor/onion.hpp"
#include "qsor/transport.hpp"

namespace qsor {

// Onion-key material advertised by a relay. Either or both may be present.
struct OnionKeySet {
  std::optional<PublicKey> classical;
  std::optional<PublicKey> post_quantum;
  friend bool operator==(const OnionKeySet&, const OnionKeySet&) = default;
};

struct NodeDescriptor {
  std::string nickname;
  std::string address;
  OnionKeySet onion_key;
  std::int64_t published_at = 0;  // unix seconds
  friend bool operator==(const NodeDescriptor&, const NodeDescriptor&) = default;
};

struct ConsensusDocument {
  std::uint64_t epoch = 0;
  std::int64_t valid_until = 0;
  std::vector<NodeDescriptor> nodes;  // sorted by nickname
  friend bool operator==(const ConsensusDocument&, const ConsensusDocument&) = default;
};

enum class OnionKeyMode : std::uint8_t { classical, post_quantum, hybrid };

// Which onion keys clients use; maps one-to-one onto SO / QSO / HSO.
struct MigrationPolicy {
  OnionKeyMode mode = OnionKeyMode::post_quantum;
  SchemeId classical = schemes::rsa2048;
  SchemeId post_quantum = schemes::kyber512;

  Protocol protocol() const noexcept;
  static MigrationPolicy for_protocol(Protocol protocol, SchemeId classical, SchemeId post_quantum);
  // Throws invalid_argument if a scheme needed by the mode has the wrong family.
  void validate(const SchemeRegistry& registry) const;
};

inline constexpr std::int64_t kConsensusLifetimeSeconds = 3600;
inline constexpr std::size_t kMinConsensusRelays = 3;

void validate_descriptor(const SchemeRegistry& registry, const NodeDescriptor& descriptor);

std::string serialize_descriptor(const NodeDescriptor& descriptor);
NodeDescriptor parse_descriptor(const SchemeRegistry& registry, std::string_view text);
std::string serialize_consensus(const ConsensusDocument& consensus);
ConsensusDocument parse_consensus(const SchemeRegistry& registry, std::string_view text);

class DirectoryStore {
 public:
  explicit DirectoryStore(const SchemeRegistry& registry = SchemeRegistry::builtin())
      : registry_(&registry) {}

  // Last writer wins by published_at: a descriptor older than the stored one
  // for the same nickname is rejected with stale_descriptor.
  void publish(NodeDescriptor descriptor);

  // Deterministic for a given store content and epoch. Throws
  // insufficient_relays below `min_relays`.
  ConsensusDocument make_consensus(std::uint64_t epoch,
                                   std::size_t min_relays = kMinConsensusRelays) const;

  std::size_t size() const;
  const SchemeRegistry& registry() const noexcept { return *registry_; }

 private:
  const SchemeRegistry* registry_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, NodeDescriptor> descriptors_;
};

// Uniformly samples `length` distinct relays that carry the keys `policy`
// needs. Throws insufficient_relays if fewer are eligible.
std::vector<HopSpec> select_path(const ConsensusDocument& consensus, const MigrationPolicy& policy,
                                 Rng& rng, std::size_t length = kDefaultHops);

// Directory protocol carried on circuit 0: each message is a 4-byte length
// followed by op(1) and op-specific data.
namespace dirproto {
enum class Op : std::uint8_t {
  publish = 0x01,
  get_consensus = 0x02,
  publish_result = 0x81,
  consensus = 0x82,
};

Bytes encode(Op op, ByteView data);
// Returns op and data; throws malformed on bad framing.
std::pair<Op, Bytes> decode(ByteView message);
}  // namespace dirproto

// Serves PUBLISH and GET_CONSENSUS until stopped.
void serve_directory(DirectoryStore& store, Transport& transport, std::stop_token stop);

// Client side of the directory protocol. Cells arriving meanwhile on other
// circuits are discarded.
void publish_remote(Transport& transport, const std::string& directory,
                    const NodeDescriptor& descriptor,
                    std::chrono::milliseconds timeout = std::chrono::seconds(5));
ConsensusDocument fetch_consensus(const SchemeRegistry& registry, Transport& transport,
                                  const std::string& directory, std::uint64_t epoch,
                                  std::chrono::milliseconds timeout = std::chrono::seconds(5));

}  // namespace qsor

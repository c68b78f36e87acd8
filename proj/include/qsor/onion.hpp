#pragma once

// Layered onion messages for the three circuit-creation variants:
//   SO  - one classical KEM ciphertext per layer
//   QSO - one post-quantum KEM ciphertext per layer
//   HSO - one of each; the layer key is the XOR of both secrets
//
// Layer wire format (integers big-endian):
//
//   version(1)=0x01 | protocol(1) | scheme_id(1) | ct_len(2) | ct
//     [HSO: | scheme_id(1) | ct_len(2) | ct]
//   | nonce(12) | AES-256-GCM(plain) with 16-byte tag
//
//   plain := next_hop_len(1) | next_hop | inner
//
// The header (everything before the nonce) is the AEAD associated data. An
// empty next_hop marks the exit layer.

#include <optional>
#include <string>
#include <vector>

#include "qsor/bytes.hpp"
#include "qsor/kem.hpp"
#include "qsor/rng.hpp"

namespace qsor {

enum class Protocol : std::uint8_t { so = 0, qso = 1, hso = 2 };

const char* protocol_name(Protocol p) noexcept;
// Accepts "so", "qso", "hso" in any case.
Protocol parse_protocol(std::string_view text);

inline constexpr std::uint8_t kOnionVersion = 0x01;
inline constexpr std::size_t kMaxNextHopLength = 255;
inline constexpr std::size_t kDefaultMaxPayload = 1u << 20;
inline constexpr std::size_t kDefaultHops = 3;

struct HopSpec {
  std::string address;
  // SO uses the classical key, QSO the post-quantum key, HSO both.
  std::optional<PublicKey> classical_key;
  std::optional<PublicKey> pq_key;
};

// The parts of a hop that determine layer size.
struct HopShape {
  std::size_t address_length = 0;
  std::optional<SchemeId> classical;
  std::optional<SchemeId> post_quantum;
};

HopShape shape_of(const HopSpec& hop);

struct OnionMessage {
  Protocol protocol = Protocol::so;
  Bytes bytes;
};

struct LayerPlaintext {
  std::string next_hop;
  Bytes inner;
};

// Private key material a relay uses to peel layers addressed to it.
struct NodeKeys {
  std::optional<KemKeyPair> classical;
  std::optional<KemKeyPair> post_quantum;
};

struct LayerHeader {
  Protocol protocol = Protocol::so;
  std::vector<KemCiphertext> ciphertexts;
  std::size_t header_size = 0;  // bytes before the nonce
};

struct WrapOptions {
  std::size_t max_payload = kDefaultMaxPayload;
};

// Builds the onion innermost-first; the result is the layer for hops.front().
OnionMessage wrap(const SchemeRegistry& registry, ByteView payload, std::span<const HopSpec> hops,
                  Protocol protocol, Rng& rng, const WrapOptions& options = {});

// Peels one layer. Errors: truncated_frame, malformed, unknown_scheme,
// key_unavailable, integrity_failure (KEM), authentication_failure (AEAD).
LayerPlaintext unwrap_layer(const SchemeRegistry& registry, const NodeKeys& keys, ByteView layer);

// Parses only the cleartext header of a layer.
LayerHeader parse_layer_header(const SchemeRegistry& registry, ByteView layer);

// Exact serialized size of wrap(...) without doing any cryptography.
std::size_t onion_size(const SchemeRegistry& registry, Protocol protocol,
                       std::span<const HopShape> hops, std::size_t payload_len);
std::size_t onion_size(const SchemeRegistry& registry, Protocol protocol,
                       std::span<const HopSpec> hops, std::size_t payload_len);

}  // namespace qsor

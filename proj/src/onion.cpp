#include "qsor/onion.hpp"

#include <algorithm>
#include <cctype>

#include "qsor/crypto.hpp"
#include "qsor/error.hpp"

namespace qsor {
namespace {

constexpr std::size_t kCtEntryOverhead = 3;  // scheme_id + ct_len
constexpr std::size_t kFixedHeader = 2;      // version + protocol
constexpr std::size_t kSealOverhead = crypto::kAeadNonceSize + crypto::kAeadTagSize + 1;

// Scheme ids a layer for `protocol` carries, in wire order.
std::vector<SchemeId> layer_schemes(const SchemeRegistry& registry, Protocol protocol,
                                    const std::optional<SchemeId>& classical,
                                    const std::optional<SchemeId>& pq) {
  auto need = [&](const std::optional<SchemeId>& id, bool want_classical) {
    if (!id) {
      throw Error(Errc::invalid_argument, std::string(protocol_name(protocol)) + " hop needs a " +
                                              (want_classical ? "classical" : "post-quantum") +
                                              " key");
    }
    const auto& p = registry.profile(*id);
    if ((p.family == SchemeFamily::classical) != want_classical) {
      throw Error(Errc::invalid_argument,
                  p.name + " cannot serve as the " +
                      (want_classical ? "classical" : "post-quantum") + " key of a " +
                      protocol_name(protocol) + " hop");
    }
    return *id;
  };
  switch (protocol) {
    case Protocol::so: return {need(classical, true)};
    case Protocol::qso: return {need(pq, false)};
    case Protocol::hso: return {need(classical, true), need(pq, false)};
  }
  throw Error(Errc::invalid_argument, "unknown protocol");
}

std::size_t header_size(const SchemeRegistry& registry, std::span<const SchemeId> ids) {
  std::size_t n = kFixedHeader;
  for (auto id : ids) n += kCtEntryOverhead + registry.profile(id).ciphertext_size;
  return n;
}

const PublicKey& key_for(const HopSpec& hop, SchemeId id) {
  if (hop.classical_key && hop.classical_key->scheme == id) return *hop.classical_key;
  return *hop.pq_key;
}

const KemKeyPair& node_key_for(const SchemeRegistry& registry, const NodeKeys& keys, SchemeId id) {
  for (const auto* kp : {keys.classical ? &*keys.classical : nullptr,
                         keys.post_quantum ? &*keys.post_quantum : nullptr}) {
    if (kp && kp->private_key.scheme == id) return *kp;
  }
  throw Error(Errc::key_unavailable,
              "layer uses " + registry.profile(id).name + " but this node holds no such key");
}

}  // namespace

const char* protocol_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::so: return "SO";
    case Protocol::qso: return "QSO";
    case Protocol::hso: return "HSO";
  }
  return "?";
}

Protocol parse_protocol(std::string_view text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "so") return Protocol::so;
  if (lower == "qso") return Protocol::qso;
  if (lower == "hso") return Protocol::hso;
  throw Error(Errc::invalid_argument, "unknown protocol " + std::string(text));
}

HopShape shape_of(const HopSpec& hop) {
  HopShape s;
  s.address_length = hop.address.size();
  if (hop.classical_key) s.classical = hop.classical_key->scheme;
  if (hop.pq_key) s.post_quantum = hop.pq_key->scheme;
  return s;
}

OnionMessage wrap(const SchemeRegistry& registry, ByteView payload, std::span<const HopSpec> hops,
                  Protocol protocol, Rng& rng, const WrapOptions& options) {
  if (hops.empty()) throw Error(Errc::empty_path, "wrap: hop list is empty");
  if (payload.size() > options.max_payload) {
    throw Error(Errc::payload_too_large, "wrap: payload of " + std::to_string(payload.size()) +
                                             " bytes exceeds limit of " +
                                             std::to_string(options.max_payload));
  }
  for (std::size_t i = 0; i < hops.size(); ++i) {
    if (hops[i].address.size() > kMaxNextHopLength) {
      throw Error(Errc::invalid_argument, "hop address longer than 255 bytes");
    }
    if (i > 0 && hops[i].address.empty()) {
      throw Error(Errc::invalid_argument, "hop " + std::to_string(i + 1) + " has no address");
    }
  }

  Bytes inner(payload.begin(), payload.end());
  for (std::size_t i = hops.size(); i-- > 0;) {
    const auto& hop = hops[i];
    const auto ids = layer_schemes(registry, protocol,
                                   hop.classical_key ? std::optional(hop.classical_key->scheme)
                                                     : std::nullopt,
                                   hop.pq_key ? std::optional(hop.pq_key->scheme) : std::nullopt);

    Bytes layer;
    layer.reserve(header_size(registry, ids) + kSealOverhead + inner.size() + 256);
    put_u8(layer, kOnionVersion);
    put_u8(layer, static_cast<std::uint8_t>(protocol));

    SharedSecret key;
    auto emit = [&](const KemCiphertext& ct) {
      put_u8(layer, ct.scheme.value);
      put_u16(layer, static_cast<std::uint16_t>(ct.bytes.size()));
      append(layer, ct.bytes);
    };
    if (protocol == Protocol::hso) {
      auto enc = hybrid_encapsulate(registry, {ids[0], ids[1]}, key_for(hop, ids[0]),
                                    key_for(hop, ids[1]), rng);
      emit(enc.classical);
      emit(enc.post_quantum);
      key = enc.secret;
    } else {
      auto enc = encapsulate(registry, key_for(hop, ids[0]), rng);
      emit(enc.ciphertext);
      key = enc.secret;
    }
    const std::size_t aad_len = layer.size();

    const std::string& next_hop = i + 1 < hops.size() ? hops[i + 1].address : std::string();
    Bytes plain;
    plain.reserve(1 + next_hop.size() + inner.size());
    put_u8(plain, static_cast<std::uint8_t>(next_hop.size()));
    append(plain, as_bytes(next_hop));
    append(plain, inner);

    std::array<std::uint8_t, crypto::kAeadNonceSize> nonce{};
    rng.fill(nonce);
    const auto sealed = crypto::aead_seal(key.view(), nonce, ByteView(layer).first(aad_len), plain);
    append(layer, nonce);
    append(layer, sealed);
    inner = std::move(layer);
  }
  return {protocol, std::move(inner)};
}

LayerHeader parse_layer_header(const SchemeRegistry& registry, ByteView layer) {
  if (layer.size() < kFixedHeader) throw Error(Errc::truncated_frame, "layer shorter than header");
  if (layer[0] != kOnionVersion) {
    throw Error(Errc::malformed, "unsupported layer version " + std::to_string(layer[0]));
  }
  if (layer[1] > static_cast<std::uint8_t>(Protocol::hso)) {
    throw Error(Errc::malformed, "unknown protocol byte " + std::to_string(layer[1]));
  }
  LayerHeader h;
  h.protocol = static_cast<Protocol>(layer[1]);
  const std::size_t count = h.protocol == Protocol::hso ? 2 : 1;
  std::size_t pos = kFixedHeader;
  for (std::size_t i = 0; i < count; ++i) {
    if (layer.size() < pos + kCtEntryOverhead) {
      throw Error(Errc::truncated_frame, "layer truncated in ciphertext header");
    }
    const SchemeId id{layer[pos]};
    const std::size_t ct_len = get_u16(layer.data() + pos + 1);
    pos += kCtEntryOverhead;
    const auto& profile = registry.profile(id);
    if (ct_len != profile.ciphertext_size) {
      throw Error(Errc::length_mismatch, profile.name + ": ciphertext length field is " +
                                             std::to_string(ct_len) + ", expected " +
                                             std::to_string(profile.ciphertext_size));
    }
    if (layer.size() < pos + ct_len) throw Error(Errc::truncated_frame, "layer truncated in ciphertext");
    h.ciphertexts.push_back({id, Bytes(layer.begin() + static_cast<std::ptrdiff_t>(pos),
                                       layer.begin() + static_cast<std::ptrdiff_t>(pos + ct_len))});
    pos += ct_len;
  }
  h.header_size = pos;
  return h;
}

LayerPlaintext unwrap_layer(const SchemeRegistry& registry, const NodeKeys& keys, ByteView layer) {
  const auto header = parse_layer_header(registry, layer);
  if (layer.size() < header.header_size + crypto::kAeadNonceSize + crypto::kAeadTagSize) {
    throw Error(Errc::truncated_frame, "layer truncated before sealed body");
  }

  std::vector<SchemeId> ids;
  for (const auto& ct : header.ciphertexts) ids.push_back(ct.scheme);
  // Rejects e.g. an SO layer carrying a lattice ciphertext.
  layer_schemes(registry, header.protocol, ids.front(),
                header.protocol == Protocol::hso ? std::optional(ids[1])
                                                 : std::optional(ids.front()));

  SharedSecret key;
  if (header.protocol == Protocol::hso) {
    const auto& kc = node_key_for(registry, keys, ids[0]);
    const auto& kpq = node_key_for(registry, keys, ids[1]);
    key = hybrid_decapsulate(registry, kc.private_key, kpq.private_key, header.ciphertexts[0],
                             header.ciphertexts[1]);
  } else {
    const auto& kp = node_key_for(registry, keys, ids[0]);
    key = decapsulate(registry, kp.private_key, header.ciphertexts[0]);
  }

  const auto nonce = layer.subspan(header.header_size, crypto::kAeadNonceSize);
  const auto sealed = layer.subspan(header.header_size + crypto::kAeadNonceSize);
  auto plain = crypto::aead_open(key.view(), nonce, layer.first(header.header_size), sealed);
  if (!plain) {
    throw Error(Errc::authentication_failure, "layer failed authenticated decryption");
  }
  if (plain->empty() || plain->size() < 1u + (*plain)[0]) {
    throw Error(Errc::malformed, "layer plaintext too short for its next-hop field");
  }
  const std::size_t nh_len = (*plain)[0];
  LayerPlaintext out;
  out.next_hop.assign(reinterpret_cast<const char*>(plain->data() + 1), nh_len);
  out.inner.assign(plain->begin() + 1 + static_cast<std::ptrdiff_t>(nh_len), plain->end());
  return out;
}

std::size_t onion_size(const SchemeRegistry& registry, Protocol protocol,
                       std::span<const HopShape> hops, std::size_t payload_len) {
  std::size_t size = payload_len;
  for (std::size_t i = hops.size(); i-- > 0;) {
    const auto ids = layer_schemes(registry, protocol, hops[i].classical, hops[i].post_quantum);
    const std::size_t next_hop_len = i + 1 < hops.size() ? hops[i + 1].address_length : 0;
    size = header_size(registry, ids) + kSealOverhead + next_hop_len + size;
  }
  return size;
}

std::size_t onion_size(const SchemeRegistry& registry, Protocol protocol,
                       std::span<const HopSpec> hops, std::size_t payload_len) {
  std::vector<HopShape> shapes;
  shapes.reserve(hops.size());
  for (const auto& h : hops) shapes.push_back(shape_of(h));
  return onion_size(registry, protocol, shapes, payload_len);
}

}  // namespace qsor

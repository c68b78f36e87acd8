#include "qsor/directory.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <sstream>

#include "qsor/crypto.hpp"
#include "qsor/error.hpp"

namespace qsor {
namespace {

constexpr std::string_view kClassicalTag = "classical";
constexpr std::string_view kPostQuantumTag = "post-quantum";

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed, what); }

std::int64_t parse_int(const std::string& text, const char* field) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) malformed(std::string("bad integer for ") + field);
    return v;
  } catch (const std::logic_error&) {
    malformed(std::string("bad integer for ") + field);
  }
}

void write_key(std::ostringstream& out, std::string_view tag, const PublicKey& key) {
  out << "onion-key " << tag << ' ' << unsigned{key.scheme.value} << ' '
      << crypto::base64_encode(key.bytes) << '\n';
}

// Reads descriptor fields up to and including the "end" line.
NodeDescriptor read_descriptor(const SchemeRegistry& registry, std::istream& in) {
  NodeDescriptor d;
  bool have_router = false, have_address = false, have_published = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string keyword;
    fields >> keyword;
    if (keyword == "end") {
      if (!have_router || !have_address || !have_published) {
        malformed("descriptor is missing a required field");
      }
      validate_descriptor(registry, d);
      return d;
    }
    std::string value;
    if (keyword == "router") {
      if (!(fields >> d.nickname)) malformed("router line without nickname");
      have_router = true;
    } else if (keyword == "address") {
      if (!(fields >> d.address)) malformed("address line without value");
      have_address = true;
    } else if (keyword == "published") {
      if (!(fields >> value)) malformed("published line without value");
      d.published_at = parse_int(value, "published");
      have_published = true;
    } else if (keyword == "onion-key") {
      std::string tag, id, b64;
      if (!(fields >> tag >> id >> b64)) malformed("onion-key line needs role, scheme, key");
      const auto scheme_id = parse_int(id, "onion-key scheme");
      if (scheme_id < 1 || scheme_id > 255) malformed("onion-key scheme out of range");
      auto bytes = crypto::base64_decode(b64);
      if (!bytes) malformed("onion-key is not valid base64");
      PublicKey key{SchemeId{static_cast<std::uint8_t>(scheme_id)}, std::move(*bytes)};
      if (tag == kClassicalTag) {
        d.onion_key.classical = std::move(key);
      } else if (tag == kPostQuantumTag) {
        d.onion_key.post_quantum = std::move(key);
      } else {
        malformed("unknown onion-key role " + tag);
      }
    } else {
      malformed("unknown descriptor field " + keyword);
    }
  }
  malformed("descriptor not terminated by end");
}

bool eligible(const NodeDescriptor& d, const MigrationPolicy& policy) {
  const bool c = d.onion_key.classical && d.onion_key.classical->scheme == policy.classical;
  const bool pq = d.onion_key.post_quantum && d.onion_key.post_quantum->scheme == policy.post_quantum;
  switch (policy.mode) {
    case OnionKeyMode::classical: return c;
    case OnionKeyMode::post_quantum: return pq;
    case OnionKeyMode::hybrid: return c && pq;
  }
  return false;
}

}  // namespace

Protocol MigrationPolicy::protocol() const noexcept {
  switch (mode) {
    case OnionKeyMode::classical: return Protocol::so;
    case OnionKeyMode::post_quantum: return Protocol::qso;
    case OnionKeyMode::hybrid: return Protocol::hso;
  }
  return Protocol::so;
}

MigrationPolicy MigrationPolicy::for_protocol(Protocol protocol, SchemeId classical,
                                              SchemeId post_quantum) {
  MigrationPolicy p;
  p.classical = classical;
  p.post_quantum = post_quantum;
  switch (protocol) {
    case Protocol::so: p.mode = OnionKeyMode::classical; break;
    case Protocol::qso: p.mode = OnionKeyMode::post_quantum; break;
    case Protocol::hso: p.mode = OnionKeyMode::hybrid; break;
  }
  return p;
}

void MigrationPolicy::validate(const SchemeRegistry& registry) const {
  const bool need_c = mode != OnionKeyMode::post_quantum;
  const bool need_pq = mode != OnionKeyMode::classical;
  if (need_c && registry.profile(classical).family != SchemeFamily::classical) {
    throw Error(Errc::invalid_argument, registry.profile(classical).name + " is not classical");
  }
  if (need_pq && registry.profile(post_quantum).family == SchemeFamily::classical) {
    throw Error(Errc::invalid_argument,
                registry.profile(post_quantum).name + " is not post-quantum");
  }
}

void validate_descriptor(const SchemeRegistry& registry, const NodeDescriptor& d) {
  if (d.nickname.empty() || d.nickname.find_first_of(" \t\r\n") != std::string::npos) {
    malformed("descriptor nickname must be a non-empty token");
  }
  if (d.address.empty() || d.address.size() > kMaxNextHopLength ||
      d.address.find_first_of(" \t\r\n") != std::string::npos) {
    malformed("descriptor address must be a non-empty token of at most 255 bytes");
  }
  if (!d.onion_key.classical && !d.onion_key.post_quantum) {
    malformed("descriptor " + d.nickname + " has no onion key");
  }
  auto check = [&](const std::optional<PublicKey>& key, bool classical) {
    if (!key) return;
    const auto& p = registry.profile(key->scheme);
    if ((p.family == SchemeFamily::classical) != classical) {
      malformed("descriptor " + d.nickname + ": " + p.name + " listed under the wrong key role");
    }
    if (key->bytes.size() != p.public_key_size) {
      throw Error(Errc::length_mismatch, "descriptor " + d.nickname + ": " + p.name +
                                             " key is " + std::to_string(key->bytes.size()) +
                                             " bytes, expected " +
                                             std::to_string(p.public_key_size));
    }
  };
  check(d.onion_key.classical, true);
  check(d.onion_key.post_quantum, false);
}

std::string serialize_descriptor(const NodeDescriptor& d) {
  std::ostringstream out;
  out << "router " << d.nickname << '\n'
      << "address " << d.address << '\n'
      << "published " << d.published_at << '\n';
  if (d.onion_key.classical) write_key(out, kClassicalTag, *d.onion_key.classical);
  if (d.onion_key.post_quantum) write_key(out, kPostQuantumTag, *d.onion_key.post_quantum);
  out << "end\n";
  return out.str();
}

NodeDescriptor parse_descriptor(const SchemeRegistry& registry, std::string_view text) {
  std::istringstream in{std::string(text)};
  auto d = read_descriptor(registry, in);
  std::string rest;
  while (std::getline(in, rest)) {
    if (!rest.empty()) malformed("trailing data after descriptor");
  }
  return d;
}

std::string serialize_consensus(const ConsensusDocument& c) {
  std::ostringstream out;
  out << "consensus-version 1\n"
      << "epoch " << c.epoch << '\n'
      << "valid-until " << c.valid_until << '\n'
      << "node-count " << c.nodes.size() << '\n';
  for (const auto& d : c.nodes) out << serialize_descriptor(d);
  out << "directory-end\n";
  return out.str();
}

ConsensusDocument parse_consensus(const SchemeRegistry& registry, std::string_view text) {
  std::istringstream in{std::string(text)};
  auto expect = [&](std::string_view keyword) {
    std::string line;
    if (!std::getline(in, line)) malformed("consensus truncated");
    std::istringstream fields(line);
    std::string k, v;
    if (!(fields >> k >> v) || k != keyword) malformed("expected " + std::string(keyword));
    return v;
  };
  if (expect("consensus-version") != "1") malformed("unsupported consensus version");
  ConsensusDocument c;
  c.epoch = static_cast<std::uint64_t>(parse_int(expect("epoch"), "epoch"));
  c.valid_until = parse_int(expect("valid-until"), "valid-until");
  const auto count = parse_int(expect("node-count"), "node-count");
  if (count < 0) malformed("negative node count");
  for (std::int64_t i = 0; i < count; ++i) c.nodes.push_back(read_descriptor(registry, in));
  std::string line;
  if (!std::getline(in, line) || line != "directory-end") malformed("missing directory-end");
  for (std::size_t i = 1; i < c.nodes.size(); ++i) {
    if (c.nodes[i - 1].nickname >= c.nodes[i].nickname) {
      malformed("consensus nicknames not unique and sorted");
    }
  }
  return c;
}

void DirectoryStore::publish(NodeDescriptor descriptor) {
  validate_descriptor(*registry_, descriptor);
  std::unique_lock lock(mutex_);
  auto it = descriptors_.find(descriptor.nickname);
  if (it != descriptors_.end() && it->second.published_at > descriptor.published_at) {
    throw Error(Errc::stale_descriptor, "descriptor for " + descriptor.nickname +
                                            " is older than the stored one");
  }
  auto name = descriptor.nickname;
  descriptors_.insert_or_assign(std::move(name), std::move(descriptor));
}

ConsensusDocument DirectoryStore::make_consensus(std::uint64_t epoch, std::size_t min_relays) const {
  std::shared_lock lock(mutex_);
  if (descriptors_.size() < min_relays) {
    throw Error(Errc::insufficient_relays,
                "insufficient relays: " + std::to_string(descriptors_.size()) + " published, " +
                    std::to_string(min_relays) + " required");
  }
  ConsensusDocument c;
  c.epoch = epoch;
  c.valid_until = static_cast<std::int64_t>(epoch + 1) * kConsensusLifetimeSeconds;
  c.nodes.reserve(descriptors_.size());
  for (const auto& [name, d] : descriptors_) c.nodes.push_back(d);
  return c;
}

std::size_t DirectoryStore::size() const {
  std::shared_lock lock(mutex_);
  return descriptors_.size();
}

std::vector<HopSpec> select_path(const ConsensusDocument& consensus, const MigrationPolicy& policy,
                                 Rng& rng, std::size_t length) {
  if (length == 0) throw Error(Errc::empty_path, "path length must be at least 1");
  std::vector<const NodeDescriptor*> pool;
  for (const auto& d : consensus.nodes) {
    if (eligible(d, policy)) pool.push_back(&d);
  }
  if (pool.size() < length) {
    throw Error(Errc::insufficient_relays,
                "insufficient relays: " + std::to_string(pool.size()) + " eligible, path needs " +
                    std::to_string(length));
  }
  // Partial Fisher-Yates: the first `length` slots are a uniform sample
  // without replacement, in uniformly random order.
  for (std::size_t i = 0; i < length; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<HopSpec> hops;
  hops.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto& d = *pool[i];
    HopSpec h;
    h.address = d.address;
    if (policy.mode != OnionKeyMode::post_quantum) h.classical_key = d.onion_key.classical;
    if (policy.mode != OnionKeyMode::classical) h.pq_key = d.onion_key.post_quantum;
    hops.push_back(std::move(h));
  }
  return hops;
}

namespace dirproto {

Bytes encode(Op op, ByteView data) {
  Bytes out;
  out.reserve(5 + data.size());
  put_u32(out, static_cast<std::uint32_t>(1 + data.size()));
  put_u8(out, static_cast<std::uint8_t>(op));
  append(out, data);
  return out;
}

std::pair<Op, Bytes> decode(ByteView message) {
  if (message.size() < 5) malformed("directory message shorter than its header");
  const auto len = get_u32(message.data());
  if (len != message.size() - 4) malformed("directory message length prefix mismatch");
  return {static_cast<Op>(message[4]), Bytes(message.begin() + 5, message.end())};
}

}  // namespace dirproto

namespace {

Bytes status_reply(dirproto::Op op, Errc status, std::string_view body) {
  Bytes data;
  put_u8(data, static_cast<std::uint8_t>(status));
  append(data, as_bytes(body));
  return dirproto::encode(op, data);
}

Bytes handle_request(DirectoryStore& store, const Bytes& message) {
  using dirproto::Op;
  try {
    const auto [op, data] = dirproto::decode(message);
    const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
    switch (op) {
      case Op::publish: {
        store.publish(parse_descriptor(store.registry(), text));
        return status_reply(Op::publish_result, Errc::ok, "accepted");
      }
      case Op::get_consensus: {
        if (data.size() != 8) malformed("GET_CONSENSUS needs an 8-byte epoch");
        std::uint64_t epoch = (std::uint64_t{get_u32(data.data())} << 32) | get_u32(data.data() + 4);
        return status_reply(Op::consensus, Errc::ok,
                            serialize_consensus(store.make_consensus(epoch)));
      }
      default:
        malformed("unknown directory op");
    }
  } catch (const Error& e) {
    const auto op = !message.empty() && message.size() > 4 &&
                            message[4] == static_cast<std::uint8_t>(dirproto::Op::get_consensus)
                        ? dirproto::Op::consensus
                        : dirproto::Op::publish_result;
    return status_reply(op, e.code(), e.what());
  }
}

Bytes await_reply(Transport& transport, const std::string& directory,
                  std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  Reassembler reassembler;
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) throw Error(Errc::timeout, "no reply from directory " + directory);
    auto d = transport.receive(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now));
    if (!d || d->cell.circuit_id != kDirectoryCircuit || d->peer != directory) continue;
    auto res = reassembler.accept(d->peer, d->cell);
    if (res.outcome == Reassembler::Outcome::complete) return std::move(res.message);
  }
}

std::string check_reply(const Bytes& reply, dirproto::Op expected) {
  const auto [op, data] = dirproto::decode(reply);
  if (op != expected || data.empty()) malformed("unexpected directory reply");
  const auto status = static_cast<Errc>(data[0]);
  std::string body(reinterpret_cast<const char*>(data.data() + 1), data.size() - 1);
  if (status != Errc::ok) throw Error(status, body);
  return body;
}

}  // namespace

void serve_directory(DirectoryStore& store, Transport& transport, std::stop_token stop) {
  Reassembler reassembler;
  while (!stop.stop_requested()) {
    auto d = transport.receive(std::chrono::milliseconds(50));
    reassembler.expire();
    if (!d || d->cell.circuit_id != kDirectoryCircuit) continue;
    auto res = reassembler.accept(d->peer, d->cell);
    if (res.outcome != Reassembler::Outcome::complete) continue;
    const auto reply = handle_request(store, res.message);
    try {
      send_message(transport, d->peer, reply, kDirectoryCircuit);
    } catch (const Error&) {
      // Requester went away.
    }
  }
}

void publish_remote(Transport& transport, const std::string& directory,
                    const NodeDescriptor& descriptor, std::chrono::milliseconds timeout) {
  const auto text = serialize_descriptor(descriptor);
  send_message(transport, directory, dirproto::encode(dirproto::Op::publish, as_bytes(text)),
               kDirectoryCircuit);
  check_reply(await_reply(transport, directory, timeout), dirproto::Op::publish_result);
}

ConsensusDocument fetch_consensus(const SchemeRegistry& registry, Transport& transport,
                                  const std::string& directory, std::uint64_t epoch,
                                  std::chrono::milliseconds timeout) {
  Bytes data;
  put_u32(data, static_cast<std::uint32_t>(epoch >> 32));
  put_u32(data, static_cast<std::uint32_t>(epoch));
  send_message(transport, directory, dirproto::encode(dirproto::Op::get_consensus, data),
               kDirectoryCircuit);
  const auto body =
      check_reply(await_reply(transport, directory, timeout), dirproto::Op::consensus);
  return parse_consensus(registry, body);
}

}  // namespace qsor

#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "doctest.h"
#include "qsor/directory.hpp"
#include "test_support.hpp"

using namespace qsor;
using namespace std::chrono_literals;
using qsor::test::error_of;

namespace {

const SchemeRegistry& reg() { return SchemeRegistry::builtin(); }

NodeDescriptor make_descriptor(Rng& rng, const std::string& nick, std::optional<SchemeId> c,
                               std::optional<SchemeId> pq, std::int64_t published = 1000) {
  NodeDescriptor d;
  d.nickname = nick;
  d.address = nick + ".example";
  d.published_at = published;
  if (c) d.onion_key.classical = keygen(reg(), *c, rng).public_key;
  if (pq) d.onion_key.post_quantum = keygen(reg(), *pq, rng).public_key;
  return d;
}

void six_relays(DirectoryStore& store, Rng& rng) {
  for (int i = 1; i <= 6; ++i) {
    store.publish(make_descriptor(rng, "relay" + std::to_string(i), schemes::rsa2048,
                                  schemes::kyber512));
  }
}

}  // namespace

TEST_SUITE("directory") {

TEST_CASE("publish validates keys and ordering") {
  SeededRng rng(1);
  DirectoryStore store;
  store.publish(make_descriptor(rng, "r1", std::nullopt, schemes::kyber512));
  CHECK(store.size() == 1);

  auto short_key = make_descriptor(rng, "r2", std::nullopt, schemes::kyber512);
  short_key.onion_key.post_quantum->bytes.resize(700);
  CHECK(error_of([&] { store.publish(short_key); }) == Errc::length_mismatch);
  CHECK(store.size() == 1);

  auto no_keys = make_descriptor(rng, "r3", std::nullopt, std::nullopt);
  CHECK(error_of([&] { store.publish(no_keys); }) == Errc::malformed);

  auto wrong_role = make_descriptor(rng, "r4", std::nullopt, schemes::kyber512);
  wrong_role.onion_key.classical = wrong_role.onion_key.post_quantum;
  CHECK(error_of([&] { store.publish(wrong_role); }) == Errc::malformed);

  auto unknown = make_descriptor(rng, "r5", std::nullopt, schemes::kyber512);
  unknown.onion_key.post_quantum->scheme = SchemeId{200};
  CHECK(error_of([&] { store.publish(unknown); }) == Errc::unknown_scheme);

  auto bad_nick = make_descriptor(rng, "has space", schemes::rsa1024, std::nullopt);
  CHECK(error_of([&] { store.publish(bad_nick); }) == Errc::malformed);
}

TEST_CASE("stale descriptors are rejected, newer ones replace") {
  SeededRng rng(2);
  DirectoryStore store;
  auto d = make_descriptor(rng, "r1", schemes::rsa2048, std::nullopt, 2000);
  store.publish(d);
  auto older = make_descriptor(rng, "r1", schemes::rsa2048, std::nullopt, 1999);
  CHECK(error_of([&] { store.publish(older); }) == Errc::stale_descriptor);
  auto newer = make_descriptor(rng, "r1", schemes::rsa1024, std::nullopt, 2001);
  store.publish(newer);
  CHECK(store.size() == 1);
  for (int i = 2; i <= 3; ++i) store.publish(make_descriptor(rng, "r" + std::to_string(i), schemes::rsa2048, std::nullopt));
  CHECK(store.make_consensus(1).nodes[0] == newer);
}

TEST_CASE("consensus over six relays") {
  SeededRng rng(3);
  DirectoryStore store;
  six_relays(store, rng);
  const auto c = store.make_consensus(7);
  CHECK(c.epoch == 7);
  CHECK(c.valid_until == 8 * 3600);
  REQUIRE(c.nodes.size() == 6);
  for (std::size_t i = 1; i < c.nodes.size(); ++i) CHECK(c.nodes[i - 1].nickname < c.nodes[i].nickname);
  CHECK(serialize_consensus(store.make_consensus(7)) == serialize_consensus(c));
  CHECK(parse_consensus(reg(), serialize_consensus(c)) == c);
}

TEST_CASE("consensus needs three relays") {
  SeededRng rng(4);
  DirectoryStore store;
  store.publish(make_descriptor(rng, "a", schemes::rsa2048, std::nullopt));
  store.publish(make_descriptor(rng, "b", schemes::rsa2048, std::nullopt));
  CHECK(error_of([&] { store.make_consensus(1); }) == Errc::insufficient_relays);
  CHECK(store.make_consensus(1, 2).nodes.size() == 2);
}

TEST_CASE("descriptor text round trip and parse errors") {
  SeededRng rng(5);
  const auto d = make_descriptor(rng, "alpha", schemes::rsa1024, schemes::sike_p503, 1234567);
  const auto text = serialize_descriptor(d);
  CHECK(text.rfind("router alpha\naddress alpha.example\npublished 1234567\n", 0) == 0);
  CHECK(text.find("onion-key classical 1 ") != std::string::npos);
  CHECK(text.find("onion-key post-quantum 8 ") != std::string::npos);
  CHECK(parse_descriptor(reg(), text) == d);

  CHECK(error_of([] { parse_descriptor(reg(), "router x\n"); }) == Errc::malformed);
  CHECK(error_of([] { parse_descriptor(reg(), "router x\naddress y\nend\n"); }) == Errc::malformed);
  CHECK(error_of([] {
          parse_descriptor(reg(), "router x\naddress y\npublished 1z\nend\n");
        }) == Errc::malformed);
  CHECK(error_of([] {
          parse_descriptor(reg(), "router x\naddress y\npublished 1\nonion-key classical 1 !!!\nend\n");
        }) == Errc::malformed);
  CHECK(error_of([] { parse_descriptor(reg(), "colour blue\nend\n"); }) == Errc::malformed);
  CHECK(error_of([&] { parse_descriptor(reg(), text + "junk\n"); }) == Errc::malformed);
  CHECK(error_of([] { parse_consensus(reg(), "consensus-version 2\n"); }) == Errc::malformed);
  CHECK(error_of([] {
          parse_consensus(reg(), "consensus-version 1\nepoch 1\nvalid-until 7200\nnode-count 0\n");
        }) == Errc::malformed);
}

TEST_CASE("policy maps onto protocols") {
  for (auto p : {Protocol::so, Protocol::qso, Protocol::hso}) {
    CHECK(MigrationPolicy::for_protocol(p, schemes::rsa2048, schemes::kyber512).protocol() == p);
  }
  auto bad = MigrationPolicy::for_protocol(Protocol::qso, schemes::rsa2048, schemes::rsa1024);
  CHECK(error_of([&] { bad.validate(reg()); }) == Errc::invalid_argument);
  bad = MigrationPolicy::for_protocol(Protocol::so, schemes::kyber512, schemes::kyber512);
  CHECK(error_of([&] { bad.validate(reg()); }) == Errc::invalid_argument);
  // SO ignores the post-quantum slot.
  bad = MigrationPolicy::for_protocol(Protocol::so, schemes::rsa2048, schemes::rsa1024);
  CHECK(error_of([&] { bad.validate(reg()); }) == Errc::ok);
}

TEST_CASE("selected paths are distinct relays carrying the policy's keys") {
  SeededRng rng(6);
  DirectoryStore store;
  six_relays(store, rng);
  store.publish(make_descriptor(rng, "classic-only", schemes::rsa2048, std::nullopt));
  store.publish(make_descriptor(rng, "sike-only", std::nullopt, schemes::sike_p503));
  const auto c = store.make_consensus(1);
  for (auto p : {Protocol::so, Protocol::qso, Protocol::hso}) {
    const auto policy = MigrationPolicy::for_protocol(p, schemes::rsa2048, schemes::kyber512);
    for (int i = 0; i < 200; ++i) {
      const auto path = select_path(c, policy, rng, 3);
      REQUIRE(path.size() == 3);
      std::set<std::string> seen;
      for (const auto& h : path) {
        seen.insert(h.address);
        CHECK(h.address != "sike-only.example");
        if (p == Protocol::qso) CHECK(h.address != "classic-only.example");
        CHECK(h.classical_key.has_value() == (p != Protocol::qso));
        CHECK(h.pq_key.has_value() == (p != Protocol::so));
      }
      CHECK(seen.size() == 3);
    }
  }
  // Every eligible relay can be selected; the path is then a permutation.
  const auto policy = MigrationPolicy::for_protocol(Protocol::qso, schemes::rsa2048, schemes::kyber512);
  const auto all = select_path(c, policy, rng, 6);
  std::set<std::string> addrs;
  for (const auto& h : all) addrs.insert(h.address);
  CHECK(addrs.size() == 6);
  CHECK(error_of([&] { select_path(c, policy, rng, 7); }) == Errc::insufficient_relays);
  CHECK(error_of([&] { select_path(c, policy, rng, 0); }) == Errc::empty_path);
  const auto sike = MigrationPolicy::for_protocol(Protocol::qso, schemes::rsa2048, schemes::sike_p503);
  CHECK(error_of([&] { select_path(c, sike, rng, 2); }) == Errc::insufficient_relays);
  CHECK(select_path(c, sike, rng, 1).front().address == "sike-only.example");
}

TEST_CASE("path selection is uniform over relays and positions") {
  SeededRng rng(7);
  DirectoryStore store;
  six_relays(store, rng);
  const auto c = store.make_consensus(1);
  const auto policy = MigrationPolicy::for_protocol(Protocol::qso, schemes::rsa2048, schemes::kyber512);
  constexpr int kDraws = 10000;
  std::map<std::string, int> count;
  std::map<std::string, int> entry;
  for (int i = 0; i < kDraws; ++i) {
    const auto path = select_path(c, policy, rng, 3);
    for (const auto& h : path) ++count[h.address];
    ++entry[path.front().address];
  }
  REQUIRE(count.size() == 6);
  for (const auto& [addr, n] : count) {
    CAPTURE(addr);
    CHECK(std::abs(static_cast<double>(n) / kDraws - 0.5) <= 0.02);
    CHECK(std::abs(static_cast<double>(entry[addr]) / kDraws - 1.0 / 6) <= 0.02);
  }
}

TEST_CASE("directory protocol framing") {
  const auto m = dirproto::encode(dirproto::Op::publish, as_bytes("abc"));
  CHECK(m.size() == 8);
  CHECK(get_u32(m.data()) == 4);
  const auto [op, data] = dirproto::decode(m);
  CHECK(op == dirproto::Op::publish);
  CHECK(data == Bytes{'a', 'b', 'c'});
  CHECK(error_of([&] { dirproto::decode(ByteView(m).first(7)); }) == Errc::malformed);
  CHECK(error_of([] { dirproto::decode(Bytes{0, 0, 0}); }) == Errc::malformed);
}

TEST_CASE("remote publish and fetch over the in-process network") {
  SeededRng rng(8);
  InProcessNetwork net;
  auto dir_ep = net.endpoint("directory");
  auto client = net.endpoint("client");
  DirectoryStore store;
  std::jthread server([&](std::stop_token st) { serve_directory(store, *dir_ep, st); });

  for (int i = 1; i <= 2; ++i) {
    publish_remote(*client, "directory",
                   make_descriptor(rng, "r" + std::to_string(i), schemes::rsa2048, schemes::kyber512));
  }
  CHECK(error_of([&] { fetch_consensus(reg(), *client, "directory", 1); }) ==
        Errc::insufficient_relays);
  publish_remote(*client, "directory", make_descriptor(rng, "r3", std::nullopt, schemes::frodo640_aes));
  auto stale = make_descriptor(rng, "r1", schemes::rsa2048, std::nullopt, 1);
  CHECK(error_of([&] { publish_remote(*client, "directory", stale); }) == Errc::stale_descriptor);
  auto bad = make_descriptor(rng, "r9", std::nullopt, schemes::kyber512);
  bad.onion_key.post_quantum->bytes.resize(700);
  CHECK(error_of([&] { publish_remote(*client, "directory", bad); }) == Errc::length_mismatch);

  const auto c = fetch_consensus(reg(), *client, "directory", 3);
  CHECK(c == store.make_consensus(3));
  CHECK(c.nodes.size() == 3);
  CHECK(c.nodes[2].onion_key.post_quantum->bytes.size() == 9616);
}

TEST_CASE("fetch times out without a directory") {
  InProcessNetwork net;
  auto client = net.endpoint("client");
  auto silent = net.endpoint("directory");
  CHECK(error_of([&] { fetch_consensus(reg(), *client, "directory", 1, 100ms); }) == Errc::timeout);
}

}  // TEST_SUITE

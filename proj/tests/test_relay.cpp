#include <algorithm>
#include <thread>

#include "doctest.h"
#include "qsor/relay.hpp"
#include "qsor/simulate.hpp"
#include "test_support.hpp"

using namespace qsor;
using namespace std::chrono_literals;
using qsor::test::error_of;
using qsor::test::make_node;

namespace {

bool any_line_contains(const std::vector<std::string>& lines, std::string_view needle) {
  return std::any_of(lines.begin(), lines.end(),
                     [&](const std::string& l) { return l.find(needle) != std::string::npos; });
}

SimulationConfig base_config(Protocol p) {
  SimulationConfig c;
  c.protocol = p;
  c.payload = Bytes(64, 0x61);
  c.seed = 99;
  c.seeded = true;
  return c;
}

}  // namespace

TEST_SUITE("relay") {

TEST_CASE("relay_handle peels, forwards and delivers") {
  SeededRng rng(1);
  InProcessNetwork net;
  auto client = net.endpoint("client");
  std::vector<qsor::test::TestNode> nodes;
  std::vector<std::unique_ptr<Transport>> eps;
  std::vector<RelayState> states(3);
  std::vector<HopSpec> hops;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "relay" + std::to_string(i + 1);
    nodes.push_back(make_node(rng, name, std::nullopt, schemes::kyber512));
    eps.push_back(net.endpoint(name));
    states[i].nickname = name;
    states[i].keys = nodes.back().keys;
    hops.push_back(nodes.back().hop);
  }
  std::optional<Bytes> delivered;
  std::string exit_from;
  states[2].exit_sink = [&](std::uint32_t id, const std::string& from, Bytes p) {
    CHECK(id == 0xabcd);
    exit_from = from;
    delivered = std::move(p);
  };

  const Bytes payload(300, 0x11);
  const auto onion = wrap(SchemeRegistry::builtin(), payload, hops, Protocol::qso, rng);
  send_message(*client, "relay1", onion.bytes, 0xabcd);

  // Pump each relay in turn until nothing is left in flight.
  for (int round = 0; round < 3; ++round) {
    for (std::size_t i = 0; i < 3; ++i) {
      while (auto d = eps[i]->receive(20ms)) relay_handle(states[i], *eps[i], *d);
    }
  }
  REQUIRE(delivered.has_value());
  CHECK(*delivered == payload);
  CHECK(exit_from == "relay2");
  for (auto& s : states) CHECK(s.layers_removed == 1);
  CHECK(states[0].forwarding.at(0xabcd) == "relay2");

  const auto l1 = states[0].log->lines();
  REQUIRE(l1.size() == 1);
  CHECK(l1[0] == "[relay1] circuit 0000abcd: layer removed, from client to relay2, " +
                     std::to_string(onion.bytes.size() - (2 + 3 + 736 + 12 + 1 + 6 + 16)) +
                     " bytes");
  const auto l2 = states[1].log->lines();
  REQUIRE(l2.size() == 1);
  CHECK(l2[0].find("from relay1 to relay3") != std::string::npos);
  CHECK(l2[0].find("client") == std::string::npos);
  CHECK(states[2].log->lines()[0] == "[relay3] circuit 0000abcd: exit, from relay2, delivering 300 bytes");
}

TEST_CASE("relay drops continuation cells of unknown circuits and layers it cannot open") {
  SeededRng rng(2);
  InProcessNetwork net;
  auto client = net.endpoint("client");
  auto ep = net.endpoint("relay1");
  auto node = make_node(rng, "relay1", schemes::rsa2048, std::nullopt);
  auto other = make_node(rng, "relay1", schemes::rsa2048, std::nullopt);
  RelayState st;
  st.nickname = "relay1";
  st.keys = other.keys;
  std::optional<Errc> dropped;
  st.on_drop = [&](std::uint32_t, Errc e) { dropped = e; };

  const auto onion =
      wrap(SchemeRegistry::builtin(), Bytes(2000, 1), std::vector<HopSpec>{node.hop}, Protocol::so, rng);
  auto cells = fragment(onion.bytes, 77);
  client->send("relay1", cells[1]);
  while (auto d = ep->receive(20ms)) relay_handle(st, *ep, *d);
  CHECK(st.cells_dropped == 1);
  CHECK(st.log->lines().back() == "[relay1] circuit 0000004d: dropped cell seq 1 from client: unknown circuit");

  for (const auto& c : cells) client->send("relay1", c);
  while (auto d = ep->receive(20ms)) relay_handle(st, *ep, *d);
  REQUIRE(dropped.has_value());
  CHECK(*dropped == Errc::authentication_failure);
  CHECK(st.circuits_dropped == 1);
  CHECK(any_line_contains(st.log->lines(), "dropped circuit from client: authentication failure"));
}

TEST_CASE("end-to-end simulation delivers for every protocol") {
  for (auto p : {Protocol::so, Protocol::qso, Protocol::hso}) {
    CAPTURE(protocol_name(p));
    const auto r = run_simulation(base_config(p));
    CHECK(r.delivered);
    CHECK(r.received == Bytes(64, 0x61));
    REQUIRE(r.path.size() == 3);
    CHECK(r.circuits_dropped == 0);
    const auto& entry = r.relay_logs.at(r.path[0]);
    const auto& middle = r.relay_logs.at(r.path[1]);
    const auto& exit = r.relay_logs.at(r.path[2]);
    CHECK(any_line_contains(entry, "from client to " + r.path[1]));
    CHECK(any_line_contains(middle, "from " + r.path[0] + " to " + r.path[2]));
    CHECK_FALSE(any_line_contains(middle, "client"));
    CHECK(any_line_contains(exit, "exit, from " + r.path[1] + ", delivering 64 bytes"));
    CHECK(r.onion_size == onion_size(SchemeRegistry::builtin(), p,
                                     std::vector<HopShape>(3, HopShape{6, schemes::rsa2048, schemes::kyber512}),
                                     64));
  }
}

TEST_CASE("seeded simulations are reproducible") {
  const auto a = run_simulation(base_config(Protocol::qso));
  const auto b = run_simulation(base_config(Protocol::qso));
  CHECK(a.path == b.path);
  CHECK(a.circuit_id == b.circuit_id);
}

TEST_CASE("a flipped bit drops the circuit at the tampered hop") {
  for (std::size_t hop = 1; hop <= 3; ++hop) {
    CAPTURE(hop);
    auto cfg = base_config(Protocol::hso);
    cfg.tamper_hop = hop;
    const auto r = run_simulation(cfg);
    CHECK_FALSE(r.delivered);
    CHECK(r.received.empty());
    CHECK(r.circuits_dropped == 1);
    CHECK(any_line_contains(r.relay_logs.at(r.path[hop - 1]), "dropped circuit"));
    for (std::size_t j = hop; j < 3; ++j) CHECK(r.relay_logs.at(r.path[j]).empty());
  }
}

TEST_CASE("simulation argument checks") {
  auto cfg = base_config(Protocol::qso);
  cfg.nodes = 2;
  CHECK(error_of([&] { run_simulation(cfg); }) == Errc::insufficient_relays);
  cfg.nodes = 4;
  cfg.hops = 5;
  CHECK(error_of([&] { run_simulation(cfg); }) == Errc::insufficient_relays);
  cfg = base_config(Protocol::qso);
  cfg.post_quantum = schemes::rsa1024;
  CHECK(error_of([&] { run_simulation(cfg); }) == Errc::invalid_argument);
  cfg = base_config(Protocol::qso);
  cfg.tamper_hop = 4;
  CHECK(error_of([&] { run_simulation(cfg); }) == Errc::invalid_argument);
  cfg.tamper_hop = 1;
  cfg.transport = TransportKind::tcp;
  CHECK(error_of([&] { run_simulation(cfg); }) == Errc::invalid_argument);
}

TEST_CASE("longer paths and other schemes") {
  auto cfg = base_config(Protocol::qso);
  cfg.nodes = 8;
  cfg.hops = 5;
  cfg.post_quantum = schemes::frodo640_shake;
  cfg.payload = Bytes(5000, 3);
  const auto r = run_simulation(cfg);
  CHECK(r.delivered);
  CHECK(r.path.size() == 5);
}

TEST_CASE("simulation over TCP") {
  auto cfg = base_config(Protocol::hso);
  cfg.transport = TransportKind::tcp;
  cfg.post_quantum = schemes::ntru_hps2048509;
  const auto r = run_simulation(cfg);
  CHECK(r.delivered);
  REQUIRE(r.path.size() == 3);
  for (const auto& a : r.path) CHECK(a.rfind("127.0.0.1:", 0) == 0);
  CHECK_FALSE(any_line_contains(r.relay_logs.at(r.path[1]), "client"));
}

}  // TEST_SUITE

#include <thread>

#include "doctest.h"
#include "qsor/transport.hpp"
#include "test_support.hpp"

using namespace qsor;
using namespace std::chrono_literals;
using qsor::test::error_of;

namespace {

Bytes collect(Transport& t, std::size_t cells_expected, std::string* peer = nullptr) {
  std::vector<Cell> cells;
  while (cells.size() < cells_expected) {
    auto d = t.receive(2s);
    REQUIRE(d.has_value());
    if (peer) *peer = d->peer;
    cells.push_back(d->cell);
  }
  return reassemble(cells);
}

}  // namespace

TEST_SUITE("transport") {

TEST_CASE("in-process delivery reports the sender") {
  InProcessNetwork net;
  auto a = net.endpoint("alice");
  auto b = net.endpoint("bob");
  CHECK(a->address() == "alice");
  SeededRng rng(1);
  Bytes msg(1500);
  rng.fill(msg);
  send_message(*a, "bob", msg, 42);
  std::string peer;
  CHECK(collect(*b, 3, &peer) == msg);
  CHECK(peer == "alice");
  CHECK(net.cells_sent() == 3);
  CHECK_FALSE(b->receive(10ms).has_value());
}

TEST_CASE("in-process addressing errors") {
  InProcessNetwork net;
  auto a = net.endpoint("alice");
  CHECK(error_of([&] { net.endpoint("alice"); }) == Errc::invalid_argument);
  Cell c;
  c.total = 1;
  CHECK(error_of([&] { a->send("nobody", c); }) == Errc::delivery_failure);
  {
    auto tmp = net.endpoint("tmp");
  }
  CHECK(error_of([&] { a->send("tmp", c); }) == Errc::delivery_failure);
  // The name is free again.
  CHECK(error_of([&] { net.endpoint("tmp"); }) == Errc::ok);
}

TEST_CASE("wire hook sees and can corrupt cells") {
  InProcessNetwork net;
  auto a = net.endpoint("a");
  auto b = net.endpoint("b");
  int seen = 0;
  net.set_wire_hook([&](const std::string& from, const std::string& to, Cell::Wire& wire) {
    CHECK(from == "a");
    CHECK(to == "b");
    if (seen++ == 0) wire[8] = 0xff;  // frag_len out of range
  });
  Cell c;
  c.total = 1;
  c.frag_len = 3;
  a->send("b", c);
  a->send("b", c);
  auto d = b->receive(1s);
  REQUIRE(d.has_value());
  CHECK(d->cell.frag_len == 3);
  CHECK_FALSE(b->receive(10ms).has_value());
  CHECK(net.cells_rejected() == 1);
}

TEST_CASE("tcp delivery in both directions") {
  TcpTransport server;
  TcpTransport client;
  CHECK(server.address().rfind("127.0.0.1:", 0) == 0);
  CHECK(server.address() != client.address());

  SeededRng rng(2);
  Bytes msg(3000);
  rng.fill(msg);
  send_message(client, server.address(), msg, 5);
  std::string peer;
  CHECK(collect(server, packets_needed_transport_metric(msg.size()), &peer) == msg);
  CHECK_FALSE(peer.empty());

  // Reply over the accepted connection.
  const Bytes reply(10, 0x42);
  send_message(server, peer, reply, 5);
  std::string back;
  CHECK(collect(client, 1, &back) == reply);
  CHECK(back == server.address());
}

TEST_CASE("tcp handles concurrent senders") {
  TcpTransport sink;
  constexpr int kSenders = 4;
  constexpr int kCells = 50;
  std::vector<std::thread> threads;
  for (int s = 0; s < kSenders; ++s) {
    threads.emplace_back([&, s] {
      TcpTransport src;
      Cell c;
      c.circuit_id = static_cast<std::uint32_t>(s);
      c.total = 1;
      c.frag_len = 1;
      for (int i = 0; i < kCells; ++i) src.send(sink.address(), c);
      // Keep the connection open until the sink has read everything.
      std::this_thread::sleep_for(300ms);
    });
  }
  int received = 0;
  while (received < kSenders * kCells) {
    auto d = sink.receive(3s);
    if (!d) break;
    ++received;
  }
  for (auto& t : threads) t.join();
  CHECK(received == kSenders * kCells);
}

TEST_CASE("tcp errors") {
  TcpTransport t;
  Cell c;
  c.total = 1;
  CHECK(error_of([&] { t.send("not-an-address", c); }) == Errc::invalid_argument);
  // Port 1 on loopback is almost certainly closed.
  CHECK(error_of([&] { t.send("127.0.0.1:1", c); }) == Errc::delivery_failure);
  CHECK_FALSE(t.receive(10ms).has_value());
}

}  // TEST_SUITE

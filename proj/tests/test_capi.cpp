#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "qsor/qsor.h"

namespace {

std::string text_of(qsor_buffer* b) {
  std::string s(reinterpret_cast<const char*>(qsor_buffer_data(b)), qsor_buffer_size(b));
  qsor_buffer_free(b);
  return s;
}

std::vector<uint8_t> bytes_of(qsor_buffer* b) {
  std::vector<uint8_t> v(qsor_buffer_data(b), qsor_buffer_data(b) + qsor_buffer_size(b));
  qsor_buffer_free(b);
  return v;
}

struct Node {
  qsor_keypair* c = nullptr;
  qsor_keypair* pq = nullptr;
  qsor_node_keys* keys = nullptr;
  std::vector<uint8_t> c_pk, pq_pk;
};

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(qsor_api_version() == QSOR_API_VERSION);
  CHECK(std::string(qsor_status_string(QSOR_OK)) == "ok");
  CHECK(std::string(qsor_status_string(QSOR_E_INTEGRITY)) == "integrity failure");
}

TEST_CASE("scheme registry through the C API") {
  CHECK(qsor_scheme_count() >= 8);
  qsor_scheme_info info{};
  REQUIRE(qsor_scheme_lookup("kyber512", &info) == QSOR_OK);
  CHECK(info.scheme_id == 5);
  CHECK(info.public_key_size == 800);
  CHECK(info.ciphertext_size == 736);
  CHECK(info.family == QSOR_FAMILY_LATTICE);
  REQUIRE(qsor_scheme_at(7, &info) == QSOR_OK);
  CHECK(std::string(info.name) == "Sike-p503");
  CHECK(qsor_scheme_at(1000, &info) == QSOR_E_INVALID_ARGUMENT);
  CHECK(qsor_scheme_lookup("nope", &info) == QSOR_E_UNKNOWN_SCHEME);
  CHECK(std::string(qsor_last_error()).find("nope") != std::string::npos);
  CHECK(qsor_scheme_lookup(nullptr, &info) == QSOR_E_INVALID_ARGUMENT);

  qsor_buffer* table = nullptr;
  REQUIRE(qsor_scheme_table(QSOR_FORMAT_CSV, &table) == QSOR_OK);
  CHECK(text_of(table).find("Kyber512,800,1632,736") != std::string::npos);
}

TEST_CASE("KEM and hybrid through the C API") {
  qsor_rng* rng = nullptr;
  REQUIRE(qsor_rng_new_seeded(7, &rng) == QSOR_OK);
  qsor_keypair* kp = nullptr;
  REQUIRE(qsor_keypair_generate(8, rng, &kp) == QSOR_OK);
  CHECK(qsor_keypair_scheme(kp) == 8);
  qsor_buffer* pkb = nullptr;
  qsor_buffer* skb = nullptr;
  REQUIRE(qsor_keypair_public_key(kp, &pkb) == QSOR_OK);
  REQUIRE(qsor_keypair_private_key(kp, &skb) == QSOR_OK);
  const auto pk = bytes_of(pkb);
  const auto sk = bytes_of(skb);
  CHECK(pk.size() == 378);
  CHECK(sk.size() == 434);

  qsor_buffer* ctb = nullptr;
  uint8_t k1[QSOR_SECRET_SIZE], k2[QSOR_SECRET_SIZE];
  REQUIRE(qsor_encapsulate(8, pk.data(), pk.size(), rng, &ctb, k1) == QSOR_OK);
  auto ct = bytes_of(ctb);
  CHECK(ct.size() == 402);
  REQUIRE(qsor_decapsulate(8, sk.data(), sk.size(), ct.data(), ct.size(), k2) == QSOR_OK);
  CHECK(std::memcmp(k1, k2, QSOR_SECRET_SIZE) == 0);
  ct[100] ^= 4;
  CHECK(qsor_decapsulate(8, sk.data(), sk.size(), ct.data(), ct.size(), k2) == QSOR_E_INTEGRITY);
  CHECK(qsor_decapsulate(8, sk.data(), sk.size(), ct.data(), ct.size() - 1, k2) ==
        QSOR_E_LENGTH_MISMATCH);

  uint8_t x[QSOR_SECRET_SIZE];
  qsor_hybrid_combine(k1, k1, x);
  for (auto b : x) CHECK(b == 0);

  qsor_keypair* imported = nullptr;
  CHECK(qsor_keypair_import(8, pk.data(), pk.size(), sk.data(), sk.size(), &imported) == QSOR_OK);
  CHECK(qsor_keypair_import(8, pk.data(), pk.size() - 1, sk.data(), sk.size(), &imported) ==
        QSOR_E_LENGTH_MISMATCH);
  qsor_keypair_free(imported);
  CHECK(qsor_keypair_generate(99, rng, &imported) == QSOR_E_UNKNOWN_SCHEME);
  qsor_keypair_free(kp);
  qsor_rng_free(rng);
}

TEST_CASE("onion wrap and unwrap through the C API") {
  qsor_rng* rng = nullptr;
  REQUIRE(qsor_rng_new_system(&rng) == QSOR_OK);
  std::vector<Node> nodes(3);
  qsor_path* path = nullptr;
  REQUIRE(qsor_path_new(&path) == QSOR_OK);
  for (int i = 0; i < 3; ++i) {
    auto& n = nodes[i];
    REQUIRE(qsor_keypair_generate(2, rng, &n.c) == QSOR_OK);
    REQUIRE(qsor_keypair_generate(5, rng, &n.pq) == QSOR_OK);
    qsor_buffer* b = nullptr;
    qsor_keypair_public_key(n.c, &b);
    n.c_pk = bytes_of(b);
    qsor_keypair_public_key(n.pq, &b);
    n.pq_pk = bytes_of(b);
    REQUIRE(qsor_node_keys_new(n.c, n.pq, &n.keys) == QSOR_OK);
    const std::string addr = "relay" + std::to_string(i + 1);
    REQUIRE(qsor_path_add_hop(path, addr.c_str(), 2, n.c_pk.data(), n.c_pk.size(), 5,
                              n.pq_pk.data(), n.pq_pk.size()) == QSOR_OK);
  }
  CHECK(qsor_path_length(path) == 3);

  const std::vector<uint8_t> payload(64, 9);
  size_t predicted = 0;
  REQUIRE(qsor_onion_size(QSOR_PROTOCOL_HSO, path, payload.size(), &predicted) == QSOR_OK);
  CHECK(predicted == 3163);
  qsor_buffer* onion = nullptr;
  REQUIRE(qsor_onion_wrap(QSOR_PROTOCOL_HSO, payload.data(), payload.size(), path, rng, &onion) ==
          QSOR_OK);
  auto layer = bytes_of(onion);
  CHECK(layer.size() == 3163);
  for (int i = 0; i < 3; ++i) {
    qsor_buffer* nh = nullptr;
    qsor_buffer* inner = nullptr;
    REQUIRE(qsor_onion_unwrap(nodes[i].keys, layer.data(), layer.size(), &nh, &inner) == QSOR_OK);
    CHECK(text_of(nh) == (i < 2 ? "relay" + std::to_string(i + 2) : std::string()));
    layer = bytes_of(inner);
  }
  CHECK(layer == payload);

  qsor_buffer* nh = nullptr;
  qsor_buffer* inner = nullptr;
  REQUIRE(qsor_onion_wrap(QSOR_PROTOCOL_QSO, payload.data(), payload.size(), path, rng, &onion) ==
          QSOR_OK);
  layer = bytes_of(onion);
  CHECK(qsor_onion_unwrap(nodes[1].keys, layer.data(), layer.size(), &nh, &inner) ==
        QSOR_E_AUTHENTICATION);

  qsor_path* empty = nullptr;
  qsor_path_new(&empty);
  CHECK(qsor_onion_wrap(QSOR_PROTOCOL_SO, payload.data(), payload.size(), empty, rng, &onion) ==
        QSOR_E_EMPTY_PATH);
  CHECK(qsor_path_add_hop(empty, "x", 0, nullptr, 0, 0, nullptr, 0) == QSOR_E_INVALID_ARGUMENT);
  qsor_path_free(empty);

  for (auto& n : nodes) {
    qsor_node_keys_free(n.keys);
    qsor_keypair_free(n.c);
    qsor_keypair_free(n.pq);
  }
  qsor_path_free(path);
  qsor_rng_free(rng);
}

TEST_CASE("packet metrics") {
  CHECK(qsor_packets_needed_paper_metric(1223) == 3);
  CHECK(qsor_packets_needed_transport_metric(503) == 2);
}

TEST_CASE("simulation through the C API") {
  qsor_sim_config cfg;
  qsor_sim_config_init(&cfg);
  CHECK(cfg.nodes == 6);
  CHECK(cfg.hops == 3);
  const std::vector<uint8_t> payload(32, 1);
  cfg.payload = payload.data();
  cfg.payload_len = payload.size();
  cfg.protocol = QSOR_PROTOCOL_HSO;
  cfg.seeded = 1;
  cfg.seed = 4;
  qsor_sim_summary s{};
  qsor_buffer* trace = nullptr;
  qsor_buffer* path = nullptr;
  REQUIRE(qsor_simulate(&cfg, &s, &trace, &path) == QSOR_OK);
  CHECK(s.delivered == 1);
  CHECK(s.circuits_dropped == 0);
  CHECK(text_of(trace).find("delivered") != std::string::npos);
  CHECK(std::count(qsor_buffer_data(path), qsor_buffer_data(path) + qsor_buffer_size(path), '\n') >= 2);
  qsor_buffer_free(path);

  cfg.tamper_hop = 2;
  CHECK(qsor_simulate(&cfg, &s, nullptr, nullptr) == QSOR_E_DELIVERY);
  CHECK(s.delivered == 0);
  CHECK(s.circuits_dropped == 1);

  cfg.tamper_hop = 0;
  cfg.nodes = 2;
  CHECK(qsor_simulate(&cfg, &s, nullptr, nullptr) == QSOR_E_INSUFFICIENT_RELAYS);
}

TEST_CASE("benchmarks through the C API") {
  qsor_bench_config cfg;
  qsor_bench_config_init(&cfg);
  CHECK(cfg.table == 5);
  cfg.iterations = 2;
  cfg.warmup = 0;
  cfg.measure_timing = 0;
  qsor_buffer* report = nullptr;
  REQUIRE(qsor_bench_run(&cfg, QSOR_FORMAT_CSV, &report) == QSOR_OK);
  const auto csv = text_of(report);
  CHECK(csv.find("Original,SO,,,,946,2,2,,") != std::string::npos);
  cfg.iterations = 0;
  CHECK(qsor_bench_run(&cfg, QSOR_FORMAT_CSV, &report) == QSOR_E_INVALID_ARGUMENT);
  cfg.iterations = 2;
  cfg.table = 3;
  CHECK(qsor_bench_run(&cfg, QSOR_FORMAT_CSV, &report) == QSOR_E_INVALID_ARGUMENT);
  cfg.table = 4;
  cfg.measure_timing = 1;
  REQUIRE(qsor_bench_run(&cfg, QSOR_FORMAT_MARKDOWN, &report) == QSOR_OK);
  CHECK(text_of(report).find("| RSA-1024 |") != std::string::npos);
}

TEST_CASE("registry config through the C API") {
  CHECK(qsor_registry_load_config("Broken line\n") == QSOR_E_MALFORMED);
  const auto before = qsor_scheme_count();
  REQUIRE(qsor_registry_load_config("CapiKem 60 64 64 128 lattice\n") == QSOR_OK);
  CHECK(qsor_scheme_count() == before + 1);
  qsor_scheme_info info{};
  REQUIRE(qsor_scheme_lookup("capikem", &info) == QSOR_OK);
  CHECK(info.scheme_id == 60);
}

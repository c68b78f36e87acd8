#include "qsor/qsor.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <string>

#include "qsor/bench.hpp"
#include "qsor/error.hpp"
#include "qsor/kem.hpp"
#include "qsor/onion.hpp"
#include "qsor/simulate.hpp"

struct qsor_buffer {
  qsor::Bytes bytes;
};

struct qsor_rng {
  std::unique_ptr<qsor::Rng> rng;
};

struct qsor_keypair {
  qsor::KemKeyPair keypair;
};

struct qsor_path {
  std::vector<qsor::HopSpec> hops;
};

struct qsor_node_keys {
  qsor::NodeKeys keys;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_registry_mutex;
std::shared_ptr<const qsor::SchemeRegistry> g_registry;

std::shared_ptr<const qsor::SchemeRegistry> registry() {
  std::lock_guard lock(g_registry_mutex);
  if (!g_registry) {
    g_registry = std::make_shared<const qsor::SchemeRegistry>(qsor::SchemeRegistry::with_builtins());
  }
  return g_registry;
}

qsor_status fail(qsor_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
qsor_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return QSOR_OK;
  } catch (const qsor::Error& e) {
    return fail(static_cast<qsor_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(QSOR_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QSOR_E_INTERNAL, e.what());
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw qsor::Error(qsor::Errc::invalid_argument, what);
}

qsor_buffer* make_buffer(qsor::ByteView data) {
  return new qsor_buffer{qsor::Bytes(data.begin(), data.end())};
}

qsor::ByteView view(const uint8_t* data, size_t len) {
  require(data != nullptr || len == 0, "null data with nonzero length");
  return {data, len};
}

qsor::Protocol to_protocol(qsor_protocol p) {
  require(p >= QSOR_PROTOCOL_SO && p <= QSOR_PROTOCOL_HSO, "unknown protocol");
  return static_cast<qsor::Protocol>(p);
}

qsor::ReportFormat to_format(qsor_format f) {
  require(f == QSOR_FORMAT_CSV || f == QSOR_FORMAT_MARKDOWN, "unknown format");
  return f == QSOR_FORMAT_CSV ? qsor::ReportFormat::csv : qsor::ReportFormat::markdown;
}

void fill_info(const qsor::SchemeProfile& p, qsor_scheme_info* out) {
  out->scheme_id = p.id.value;
  out->name = p.name.c_str();
  out->public_key_size = p.public_key_size;
  out->private_key_size = p.private_key_size;
  out->ciphertext_size = p.ciphertext_size;
  out->family = static_cast<qsor_family>(p.family);
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

}  // namespace

extern "C" {

int qsor_api_version(void) { return QSOR_API_VERSION; }

const char* qsor_status_string(qsor_status status) {
  return qsor::errc_name(static_cast<qsor::Errc>(status));
}

const char* qsor_last_error(void) { return g_last_error.c_str(); }

const uint8_t* qsor_buffer_data(const qsor_buffer* buffer) {
  return buffer ? buffer->bytes.data() : nullptr;
}

size_t qsor_buffer_size(const qsor_buffer* buffer) { return buffer ? buffer->bytes.size() : 0; }

void qsor_buffer_free(qsor_buffer* buffer) { delete buffer; }

size_t qsor_scheme_count(void) { return registry()->profiles().size(); }

qsor_status qsor_scheme_at(size_t index, qsor_scheme_info* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto reg = registry();
    require(index < reg->profiles().size(), "scheme index out of range");
    fill_info(reg->profiles()[index], out);
  });
}

qsor_status qsor_scheme_lookup(const char* name, qsor_scheme_info* out) {
  return guarded([&] {
    require(name != nullptr && out != nullptr, "null argument");
    fill_info(registry()->lookup(name), out);
  });
}

qsor_status qsor_scheme_table(qsor_format format, qsor_buffer** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto text = qsor::emit_scheme_table(*registry(), to_format(format));
    *out = make_buffer(qsor::as_bytes(text));
  });
}

qsor_status qsor_registry_load_config(const char* text) {
  return guarded([&] {
    require(text != nullptr, "null config");
    auto updated = std::make_shared<qsor::SchemeRegistry>(*registry());
    updated->load_config(text);
    std::lock_guard lock(g_registry_mutex);
    g_registry = std::move(updated);
  });
}

qsor_status qsor_rng_new_seeded(uint64_t seed, qsor_rng** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = new qsor_rng{std::make_unique<qsor::SeededRng>(seed)};
  });
}

qsor_status qsor_rng_new_system(qsor_rng** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = new qsor_rng{std::make_unique<qsor::SystemRng>()};
  });
}

void qsor_rng_free(qsor_rng* rng) { delete rng; }

qsor_status qsor_keypair_generate(uint8_t scheme_id, qsor_rng* rng, qsor_keypair** out) {
  return guarded([&] {
    require(rng != nullptr && out != nullptr, "null argument");
    *out = new qsor_keypair{qsor::keygen(*registry(), qsor::SchemeId{scheme_id}, *rng->rng)};
  });
}

qsor_status qsor_keypair_import(uint8_t scheme_id, const uint8_t* public_key,
                                size_t public_key_len, const uint8_t* private_key,
                                size_t private_key_len, qsor_keypair** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto reg = registry();
    const qsor::SchemeId id{scheme_id};
    *out = new qsor_keypair{{qsor::import_public_key(*reg, id, view(public_key, public_key_len)),
                             qsor::import_private_key(*reg, id, view(private_key, private_key_len))}};
  });
}

uint8_t qsor_keypair_scheme(const qsor_keypair* keypair) {
  return keypair ? keypair->keypair.public_key.scheme.value : 0;
}

qsor_status qsor_keypair_public_key(const qsor_keypair* keypair, qsor_buffer** out) {
  return guarded([&] {
    require(keypair != nullptr && out != nullptr, "null argument");
    *out = make_buffer(keypair->keypair.public_key.bytes);
  });
}

qsor_status qsor_keypair_private_key(const qsor_keypair* keypair, qsor_buffer** out) {
  return guarded([&] {
    require(keypair != nullptr && out != nullptr, "null argument");
    *out = make_buffer(keypair->keypair.private_key.bytes);
  });
}

void qsor_keypair_free(qsor_keypair* keypair) { delete keypair; }

qsor_status qsor_encapsulate(uint8_t scheme_id, const uint8_t* public_key, size_t public_key_len,
                             qsor_rng* rng, qsor_buffer** ciphertext,
                             uint8_t secret[QSOR_SECRET_SIZE]) {
  return guarded([&] {
    require(rng != nullptr && ciphertext != nullptr && secret != nullptr, "null argument");
    const auto reg = registry();
    const auto pk = qsor::import_public_key(*reg, qsor::SchemeId{scheme_id},
                                            view(public_key, public_key_len));
    auto enc = qsor::encapsulate(*reg, pk, *rng->rng);
    std::memcpy(secret, enc.secret.bytes().data(), QSOR_SECRET_SIZE);
    *ciphertext = new qsor_buffer{std::move(enc.ciphertext.bytes)};
  });
}

qsor_status qsor_decapsulate(uint8_t scheme_id, const uint8_t* private_key,
                             size_t private_key_len, const uint8_t* ciphertext,
                             size_t ciphertext_len, uint8_t secret[QSOR_SECRET_SIZE]) {
  return guarded([&] {
    require(secret != nullptr, "null output");
    const auto reg = registry();
    const qsor::SchemeId id{scheme_id};
    const auto sk = qsor::import_private_key(*reg, id, view(private_key, private_key_len));
    const auto ct = view(ciphertext, ciphertext_len);
    const auto s = qsor::decapsulate(*reg, sk, {id, qsor::Bytes(ct.begin(), ct.end())});
    std::memcpy(secret, s.bytes().data(), QSOR_SECRET_SIZE);
  });
}

void qsor_hybrid_combine(const uint8_t k1[QSOR_SECRET_SIZE], const uint8_t k2[QSOR_SECRET_SIZE],
                         uint8_t out[QSOR_SECRET_SIZE]) {
  qsor::SharedSecret::Array a{}, b{};
  std::memcpy(a.data(), k1, a.size());
  std::memcpy(b.data(), k2, b.size());
  const auto c = qsor::hybrid_combine(qsor::SharedSecret(a), qsor::SharedSecret(b));
  std::memcpy(out, c.bytes().data(), QSOR_SECRET_SIZE);
}

qsor_status qsor_path_new(qsor_path** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = new qsor_path{};
  });
}

qsor_status qsor_path_add_hop(qsor_path* path, const char* address, uint8_t classical_scheme,
                              const uint8_t* classical_pk, size_t classical_pk_len,
                              uint8_t pq_scheme, const uint8_t* pq_pk, size_t pq_pk_len) {
  return guarded([&] {
    require(path != nullptr && address != nullptr, "null argument");
    require(classical_scheme != 0 || pq_scheme != 0, "hop needs at least one key");
    const auto reg = registry();
    qsor::HopSpec hop;
    hop.address = address;
    if (classical_scheme != 0) {
      hop.classical_key = qsor::import_public_key(*reg, qsor::SchemeId{classical_scheme},
                                                  view(classical_pk, classical_pk_len));
    }
    if (pq_scheme != 0) {
      hop.pq_key = qsor::import_public_key(*reg, qsor::SchemeId{pq_scheme}, view(pq_pk, pq_pk_len));
    }
    path->hops.push_back(std::move(hop));
  });
}

size_t qsor_path_length(const qsor_path* path) { return path ? path->hops.size() : 0; }

void qsor_path_free(qsor_path* path) { delete path; }

qsor_status qsor_onion_wrap(qsor_protocol protocol, const uint8_t* payload, size_t payload_len,
                            const qsor_path* path, qsor_rng* rng, qsor_buffer** out) {
  return guarded([&] {
    require(path != nullptr && rng != nullptr && out != nullptr, "null argument");
    auto onion = qsor::wrap(*registry(), view(payload, payload_len), path->hops,
                            to_protocol(protocol), *rng->rng);
    *out = new qsor_buffer{std::move(onion.bytes)};
  });
}

qsor_status qsor_onion_size(qsor_protocol protocol, const qsor_path* path, size_t payload_len,
                            size_t* out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = qsor::onion_size(*registry(), to_protocol(protocol),
                            std::span<const qsor::HopSpec>(path->hops), payload_len);
  });
}

qsor_status qsor_node_keys_new(const qsor_keypair* classical, const qsor_keypair* post_quantum,
                               qsor_node_keys** out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    auto keys = std::make_unique<qsor_node_keys>();
    if (classical) keys->keys.classical = classical->keypair;
    if (post_quantum) keys->keys.post_quantum = post_quantum->keypair;
    *out = keys.release();
  });
}

void qsor_node_keys_free(qsor_node_keys* keys) { delete keys; }

qsor_status qsor_onion_unwrap(const qsor_node_keys* keys, const uint8_t* layer, size_t layer_len,
                              qsor_buffer** next_hop, qsor_buffer** inner) {
  return guarded([&] {
    require(keys != nullptr && next_hop != nullptr && inner != nullptr, "null argument");
    auto plain = qsor::unwrap_layer(*registry(), keys->keys, view(layer, layer_len));
    auto nh = std::make_unique<qsor_buffer>(qsor_buffer{qsor::Bytes(plain.next_hop.begin(), plain.next_hop.end())});
    *inner = new qsor_buffer{std::move(plain.inner)};
    *next_hop = nh.release();
  });
}

size_t qsor_packets_needed_paper_metric(size_t message_size) {
  return qsor::packets_needed_paper_metric(message_size);
}

size_t qsor_packets_needed_transport_metric(size_t message_size) {
  return qsor::packets_needed_transport_metric(message_size);
}

void qsor_sim_config_init(qsor_sim_config* config) {
  if (!config) return;
  *config = qsor_sim_config{};
  config->nodes = 6;
  config->hops = qsor::kDefaultHops;
  config->protocol = QSOR_PROTOCOL_QSO;
  config->classical_scheme = qsor::schemes::rsa2048.value;
  config->pq_scheme = qsor::schemes::kyber512.value;
  config->transport = QSOR_TRANSPORT_INPROC;
  config->timeout_ms = 5000;
}

qsor_status qsor_simulate(const qsor_sim_config* config, qsor_sim_summary* summary,
                          qsor_buffer** trace, qsor_buffer** path) {
  bool delivered = false;
  const auto status = guarded([&] {
    require(config != nullptr, "null config");
    require(config->transport == QSOR_TRANSPORT_INPROC || config->transport == QSOR_TRANSPORT_TCP,
            "unknown transport");
    const auto reg = registry();
    qsor::SimulationConfig sim;
    sim.registry = reg.get();
    sim.nodes = config->nodes;
    sim.hops = config->hops;
    sim.protocol = to_protocol(config->protocol);
    sim.classical = qsor::SchemeId{config->classical_scheme};
    sim.post_quantum = qsor::SchemeId{config->pq_scheme};
    const auto payload = view(config->payload, config->payload_len);
    sim.payload.assign(payload.begin(), payload.end());
    sim.transport = config->transport == QSOR_TRANSPORT_TCP ? qsor::TransportKind::tcp
                                                            : qsor::TransportKind::inproc;
    sim.seeded = config->seeded != 0;
    sim.seed = config->seed;
    if (config->tamper_hop != 0) sim.tamper_hop = config->tamper_hop;
    if (config->timeout_ms != 0) sim.delivery_timeout = std::chrono::milliseconds(config->timeout_ms);

    const auto result = qsor::run_simulation(sim);
    delivered = result.delivered;
    if (summary) {
      summary->delivered = result.delivered ? 1 : 0;
      summary->circuit_id = result.circuit_id;
      summary->onion_size = result.onion_size;
      summary->cells_sent = result.cells_sent;
      summary->circuits_dropped = result.circuits_dropped;
    }
    if (trace) *trace = make_buffer(qsor::as_bytes(join_lines(result.trace)));
    if (path) *path = make_buffer(qsor::as_bytes(join_lines(result.path)));
  });
  if (status == QSOR_OK && !delivered) return fail(QSOR_E_DELIVERY, "payload was not delivered intact");
  return status;
}

void qsor_bench_config_init(qsor_bench_config* config) {
  if (!config) return;
  *config = qsor_bench_config{};
  config->table = 5;
  config->iterations = 1000;
  config->warmup = 10;
  config->hops = qsor::kDefaultHops;
  config->payload_len = 64;
  config->classical_scheme = qsor::schemes::rsa2048.value;
  config->measure_timing = 1;
  config->seed = 1;
}

qsor_status qsor_bench_run(const qsor_bench_config* config, qsor_format format,
                           qsor_buffer** report) {
  return guarded([&] {
    require(config != nullptr && report != nullptr, "null argument");
    require(config->table == 4 || config->table == 5, "table must be 4 or 5");
    require(config->schemes != nullptr || config->scheme_count == 0, "null scheme list");
    const auto fmt = to_format(format);
    const auto reg = registry();
    qsor::BenchConfig bench;
    bench.registry = reg.get();
    bench.iterations = config->iterations;
    bench.warmup = config->warmup;
    bench.hops = config->hops;
    bench.payload_len = config->payload_len;
    bench.classical = qsor::SchemeId{config->classical_scheme};
    bench.measure_timing = config->measure_timing != 0;
    bench.seed = config->seed;
    if (config->cycles_per_second > 0) bench.cycles_per_second = config->cycles_per_second;
    for (size_t i = 0; i < config->scheme_count; ++i) {
      bench.schemes.push_back(qsor::SchemeId{config->schemes[i]});
    }
    if (bench.schemes.empty()) {
      bench.schemes = config->table == 4 ? qsor::default_kem_schemes() : qsor::default_circuit_schemes();
    }
    if (config->include_frodo) {
      for (auto id : qsor::frodo_schemes()) {
        if (std::find(bench.schemes.begin(), bench.schemes.end(), id) == bench.schemes.end()) {
          bench.schemes.push_back(id);
        }
      }
    }
    const auto result = config->table == 4 ? qsor::bench_kem(bench) : qsor::bench_circuit(bench);
    *report = make_buffer(qsor::as_bytes(qsor::emit_report(result, fmt)));
  });
}

}  // extern "C"

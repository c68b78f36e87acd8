/*
 * C interface to the qsor onion-routing library.
 *
 * All objects are opaque handles released with their matching *_free
 * function. Every fallible call returns a qsor_status; on failure
 * qsor_last_error() returns a message for the calling thread.
 */
#ifndef QSOR_QSOR_H
#define QSOR_QSOR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(QSOR_BUILDING_LIBRARY)
#define QSOR_API __attribute__((visibility("default")))
#else
#define QSOR_API
#endif

#define QSOR_API_VERSION 1
#define QSOR_SECRET_SIZE 32

typedef enum qsor_status {
  QSOR_OK = 0,
  QSOR_E_INVALID_ARGUMENT = 1,
  QSOR_E_UNKNOWN_SCHEME = 2,
  QSOR_E_LENGTH_MISMATCH = 3,
  QSOR_E_INTEGRITY = 4,
  QSOR_E_AUTHENTICATION = 5,
  QSOR_E_TRUNCATED = 6,
  QSOR_E_MALFORMED = 7,
  QSOR_E_PAYLOAD_TOO_LARGE = 8,
  QSOR_E_EMPTY_PATH = 9,
  QSOR_E_INSUFFICIENT_RELAYS = 10,
  QSOR_E_STALE_DESCRIPTOR = 11,
  QSOR_E_KEY_UNAVAILABLE = 12,
  QSOR_E_IO = 13,
  QSOR_E_TIMEOUT = 14,
  QSOR_E_DELIVERY = 15,
  QSOR_E_INTERNAL = 16
} qsor_status;

typedef enum qsor_protocol {
  QSOR_PROTOCOL_SO = 0,
  QSOR_PROTOCOL_QSO = 1,
  QSOR_PROTOCOL_HSO = 2
} qsor_protocol;

typedef enum qsor_family {
  QSOR_FAMILY_CLASSICAL = 0,
  QSOR_FAMILY_LATTICE = 1,
  QSOR_FAMILY_ISOGENY = 2
} qsor_family;

typedef enum qsor_format { QSOR_FORMAT_CSV = 0, QSOR_FORMAT_MARKDOWN = 1 } qsor_format;

typedef enum qsor_transport { QSOR_TRANSPORT_INPROC = 0, QSOR_TRANSPORT_TCP = 1 } qsor_transport;

typedef struct qsor_buffer qsor_buffer;
typedef struct qsor_rng qsor_rng;
typedef struct qsor_keypair qsor_keypair;
typedef struct qsor_path qsor_path;
typedef struct qsor_node_keys qsor_node_keys;

QSOR_API int qsor_api_version(void);
QSOR_API const char* qsor_status_string(qsor_status status);
QSOR_API const char* qsor_last_error(void);

/* Byte buffers returned by the library. */
QSOR_API const uint8_t* qsor_buffer_data(const qsor_buffer* buffer);
QSOR_API size_t qsor_buffer_size(const qsor_buffer* buffer);
QSOR_API void qsor_buffer_free(qsor_buffer* buffer);

/* Scheme registry. The name pointer stays valid until the registry is
 * extended with qsor_registry_load_config. */
typedef struct qsor_scheme_info {
  uint8_t scheme_id;
  const char* name;
  size_t public_key_size;
  size_t private_key_size;
  size_t ciphertext_size;
  qsor_family family;
} qsor_scheme_info;

QSOR_API size_t qsor_scheme_count(void);
QSOR_API qsor_status qsor_scheme_at(size_t index, qsor_scheme_info* out);
QSOR_API qsor_status qsor_scheme_lookup(const char* name, qsor_scheme_info* out);
QSOR_API qsor_status qsor_scheme_table(qsor_format format, qsor_buffer** out);
/* Adds schemes from `name id pk_size sk_size ct_size family` lines to the
 * process-wide registry. Not safe to call concurrently with other calls. */
QSOR_API qsor_status qsor_registry_load_config(const char* text);

/* Randomness. A qsor_rng must not be shared between threads. */
QSOR_API qsor_status qsor_rng_new_seeded(uint64_t seed, qsor_rng** out);
QSOR_API qsor_status qsor_rng_new_system(qsor_rng** out);
QSOR_API void qsor_rng_free(qsor_rng* rng);

/* Key encapsulation. */
QSOR_API qsor_status qsor_keypair_generate(uint8_t scheme_id, qsor_rng* rng, qsor_keypair** out);
QSOR_API qsor_status qsor_keypair_import(uint8_t scheme_id, const uint8_t* public_key,
                                         size_t public_key_len, const uint8_t* private_key,
                                         size_t private_key_len, qsor_keypair** out);
QSOR_API uint8_t qsor_keypair_scheme(const qsor_keypair* keypair);
QSOR_API qsor_status qsor_keypair_public_key(const qsor_keypair* keypair, qsor_buffer** out);
QSOR_API qsor_status qsor_keypair_private_key(const qsor_keypair* keypair, qsor_buffer** out);
QSOR_API void qsor_keypair_free(qsor_keypair* keypair);

QSOR_API qsor_status qsor_encapsulate(uint8_t scheme_id, const uint8_t* public_key,
                                      size_t public_key_len, qsor_rng* rng,
                                      qsor_buffer** ciphertext,
                                      uint8_t secret[QSOR_SECRET_SIZE]);
QSOR_API qsor_status qsor_decapsulate(uint8_t scheme_id, const uint8_t* private_key,
                                      size_t private_key_len, const uint8_t* ciphertext,
                                      size_t ciphertext_len, uint8_t secret[QSOR_SECRET_SIZE]);
QSOR_API void qsor_hybrid_combine(const uint8_t k1[QSOR_SECRET_SIZE],
                                  const uint8_t k2[QSOR_SECRET_SIZE],
                                  uint8_t out[QSOR_SECRET_SIZE]);

/* Onion construction. A scheme id of 0 means "no key of this kind". */
QSOR_API qsor_status qsor_path_new(qsor_path** out);
QSOR_API qsor_status qsor_path_add_hop(qsor_path* path, const char* address,
                                       uint8_t classical_scheme, const uint8_t* classical_pk,
                                       size_t classical_pk_len, uint8_t pq_scheme,
                                       const uint8_t* pq_pk, size_t pq_pk_len);
QSOR_API size_t qsor_path_length(const qsor_path* path);
QSOR_API void qsor_path_free(qsor_path* path);

QSOR_API qsor_status qsor_onion_wrap(qsor_protocol protocol, const uint8_t* payload,
                                     size_t payload_len, const qsor_path* path, qsor_rng* rng,
                                     qsor_buffer** out);
QSOR_API qsor_status qsor_onion_size(qsor_protocol protocol, const qsor_path* path,
                                     size_t payload_len, size_t* out);

/* Either keypair may be NULL. The handle copies the keys. */
QSOR_API qsor_status qsor_node_keys_new(const qsor_keypair* classical,
                                        const qsor_keypair* post_quantum, qsor_node_keys** out);
QSOR_API void qsor_node_keys_free(qsor_node_keys* keys);
QSOR_API qsor_status qsor_onion_unwrap(const qsor_node_keys* keys, const uint8_t* layer,
                                       size_t layer_len, qsor_buffer** next_hop,
                                       qsor_buffer** inner);

/* Packet accounting. */
QSOR_API size_t qsor_packets_needed_paper_metric(size_t message_size);
QSOR_API size_t qsor_packets_needed_transport_metric(size_t message_size);

/* End-to-end simulation: directory, relays, one onion from a client. */
typedef struct qsor_sim_config {
  size_t nodes;
  size_t hops;
  qsor_protocol protocol;
  uint8_t classical_scheme;
  uint8_t pq_scheme;
  const uint8_t* payload;
  size_t payload_len;
  qsor_transport transport;
  int seeded;
  uint64_t seed;
  size_t tamper_hop; /* 0 = none; 1-based hop that receives a flipped bit */
  uint32_t timeout_ms;
} qsor_sim_config;

typedef struct qsor_sim_summary {
  int delivered;
  uint32_t circuit_id;
  size_t onion_size;
  size_t cells_sent;
  uint64_t circuits_dropped;
} qsor_sim_summary;

QSOR_API void qsor_sim_config_init(qsor_sim_config* config);
/* Returns QSOR_E_DELIVERY when the payload did not arrive intact; summary,
 * trace (newline-separated) and path (newline-separated relay addresses) are
 * filled in either case. Any output pointer may be NULL. */
QSOR_API qsor_status qsor_simulate(const qsor_sim_config* config, qsor_sim_summary* summary,
                                   qsor_buffer** trace, qsor_buffer** path);

/* Benchmarks. table = 4 (KEM costs) or 5 (circuit build). */
typedef struct qsor_bench_config {
  int table;
  size_t iterations;
  size_t warmup;
  size_t hops;
  size_t payload_len;
  const uint8_t* schemes; /* NULL = defaults for the table */
  size_t scheme_count;
  int include_frodo;
  uint8_t classical_scheme;
  double cycles_per_second; /* <= 0: no calibration */
  int measure_timing;
  uint64_t seed;
} qsor_bench_config;

QSOR_API void qsor_bench_config_init(qsor_bench_config* config);
QSOR_API qsor_status qsor_bench_run(const qsor_bench_config* config, qsor_format format,
                                    qsor_buffer** report);

#ifdef __cplusplus
}
#endif

#endif /* QSOR_QSOR_H */

// qsor command-line front end. Talks to the library only through qsor.h.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsor/qsor.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct BufferDeleter {
  void operator()(qsor_buffer* b) const { qsor_buffer_free(b); }
};
using Buffer = std::unique_ptr<qsor_buffer, BufferDeleter>;

struct RngDeleter {
  void operator()(qsor_rng* r) const { qsor_rng_free(r); }
};
using Rng = std::unique_ptr<qsor_rng, RngDeleter>;

struct KeypairDeleter {
  void operator()(qsor_keypair* k) const { qsor_keypair_free(k); }
};
using Keypair = std::unique_ptr<qsor_keypair, KeypairDeleter>;

std::string to_string(const Buffer& b) {
  return std::string(reinterpret_cast<const char*>(qsor_buffer_data(b.get())),
                     qsor_buffer_size(b.get()));
}

int report_error(qsor_status status) {
  std::cerr << "error: " << qsor_status_string(status);
  const std::string detail = qsor_last_error();
  if (!detail.empty()) std::cerr << ": " << detail;
  std::cerr << '\n';
  return status == QSOR_E_INVALID_ARGUMENT || status == QSOR_E_UNKNOWN_SCHEME ? kExitUsage
                                                                              : kExitFailure;
}

// --seed, else QSOR_SEED, else unseeded.
std::optional<std::uint64_t> effective_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("QSOR_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric QSOR_SEED\n";
    }
  }
  return std::nullopt;
}

std::optional<qsor_scheme_info> lookup_scheme(const std::string& name) {
  qsor_scheme_info info{};
  if (qsor_scheme_lookup(name.c_str(), &info) != QSOR_OK) return std::nullopt;
  return info;
}

int emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    std::cerr << "error: cannot write " << out_path << '\n';
    return kExitFailure;
  }
  return 0;
}

bool write_file(const std::string& path, const Buffer& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  return out && out.write(reinterpret_cast<const char*>(qsor_buffer_data(b.get())),
                          static_cast<std::streamsize>(qsor_buffer_size(b.get())));
}

// ---------------------------------------------------------------------------

struct KeygenOptions {
  std::string scheme;
  std::string out = "qsor-key";
  std::optional<std::uint64_t> seed;
};

int cmd_keygen(const KeygenOptions& opt) {
  if (opt.scheme.empty()) {
    std::cerr << "error: keygen needs a scheme name\n";
    return kExitUsage;
  }
  const auto info = lookup_scheme(opt.scheme);
  if (!info) {
    std::cerr << "error: unknown scheme '" << opt.scheme << "' (see `qsor bench --table 3`)\n";
    return kExitUsage;
  }
  qsor_rng* raw_rng = nullptr;
  const auto seed = effective_seed(opt.seed);
  qsor_status st = seed ? qsor_rng_new_seeded(*seed, &raw_rng) : qsor_rng_new_system(&raw_rng);
  if (st != QSOR_OK) return report_error(st);
  Rng rng(raw_rng);

  qsor_keypair* raw_kp = nullptr;
  if ((st = qsor_keypair_generate(info->scheme_id, rng.get(), &raw_kp)) != QSOR_OK) {
    return report_error(st);
  }
  Keypair kp(raw_kp);
  qsor_buffer *pk_raw = nullptr, *sk_raw = nullptr;
  if ((st = qsor_keypair_public_key(kp.get(), &pk_raw)) != QSOR_OK) return report_error(st);
  Buffer pk(pk_raw);
  if ((st = qsor_keypair_private_key(kp.get(), &sk_raw)) != QSOR_OK) return report_error(st);
  Buffer sk(sk_raw);

  const std::string pk_path = opt.out + ".pk";
  const std::string sk_path = opt.out + ".sk";
  if (!write_file(pk_path, pk) || !write_file(sk_path, sk)) {
    std::cerr << "error: cannot write key files under " << opt.out << '\n';
    return kExitFailure;
  }
  std::cout << info->name << ": wrote " << pk_path << " (" << qsor_buffer_size(pk.get())
            << " bytes) and " << sk_path << " (" << qsor_buffer_size(sk.get()) << " bytes)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::size_t nodes = 6;
  std::size_t hops = 3;
  std::string protocol = "qso";
  std::string scheme;
  std::string classical = "RSA-2048";
  std::string pq = "Kyber512";
  std::string payload = "hello from the client";
  std::string transport = "inproc";
  std::string format = "text";
  std::size_t tamper_hop = 0;
  std::uint32_t timeout_ms = 5000;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateOptions& opt) {
  qsor_sim_config cfg;
  qsor_sim_config_init(&cfg);
  cfg.nodes = opt.nodes;
  cfg.hops = opt.hops;
  cfg.protocol = opt.protocol == "so"    ? QSOR_PROTOCOL_SO
                 : opt.protocol == "hso" ? QSOR_PROTOCOL_HSO
                                         : QSOR_PROTOCOL_QSO;

  auto classical = lookup_scheme(opt.classical);
  auto pq = lookup_scheme(opt.pq);
  if (!opt.scheme.empty()) {
    auto s = lookup_scheme(opt.scheme);
    if (!s) {
      std::cerr << "error: unknown scheme '" << opt.scheme << "'\n";
      return kExitUsage;
    }
    (s->family == QSOR_FAMILY_CLASSICAL ? classical : pq) = s;
  }
  if (!classical || !pq) {
    std::cerr << "error: unknown scheme '" << (!classical ? opt.classical : opt.pq) << "'\n";
    return kExitUsage;
  }
  cfg.classical_scheme = classical->scheme_id;
  cfg.pq_scheme = pq->scheme_id;
  cfg.payload = reinterpret_cast<const std::uint8_t*>(opt.payload.data());
  cfg.payload_len = opt.payload.size();
  cfg.transport = opt.transport == "tcp" ? QSOR_TRANSPORT_TCP : QSOR_TRANSPORT_INPROC;
  cfg.tamper_hop = opt.tamper_hop;
  cfg.timeout_ms = opt.timeout_ms;
  if (const auto seed = effective_seed(opt.seed)) {
    cfg.seeded = 1;
    cfg.seed = *seed;
  }

  qsor_sim_summary summary{};
  qsor_buffer *trace_raw = nullptr, *path_raw = nullptr;
  const qsor_status st = qsor_simulate(&cfg, &summary, &trace_raw, &path_raw);
  Buffer trace(trace_raw), path(path_raw);
  if (st != QSOR_OK && st != QSOR_E_DELIVERY) return report_error(st);

  if (opt.format == "json") {
    nlohmann::json j;
    j["delivered"] = summary.delivered != 0;
    j["protocol"] = opt.protocol;
    j["circuit_id"] = summary.circuit_id;
    j["onion_size"] = summary.onion_size;
    j["cells_sent"] = summary.cells_sent;
    j["circuits_dropped"] = summary.circuits_dropped;
    std::vector<std::string> hops, lines;
    std::istringstream ps(to_string(path)), ts(to_string(trace));
    for (std::string l; std::getline(ps, l);) hops.push_back(l);
    for (std::string l; std::getline(ts, l);) lines.push_back(l);
    j["path"] = hops;
    j["trace"] = lines;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << to_string(trace);
  }
  if (st == QSOR_E_DELIVERY) {
    std::cerr << "error: delivery failure: payload did not arrive intact at the exit\n";
    return kExitFailure;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  int table = 5;
  std::size_t iterations = 1000;
  std::size_t warmup = 10;
  std::size_t hops = 3;
  std::size_t payload_len = 64;
  std::vector<std::string> schemes;
  std::string classical = "RSA-2048";
  bool include_frodo = false;
  bool sizes_only = false;
  double cycles_per_second = 0;
  std::string format = "markdown";
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_bench(const BenchOptions& opt) {
  const qsor_format format = opt.format == "csv" ? QSOR_FORMAT_CSV : QSOR_FORMAT_MARKDOWN;
  qsor_buffer* raw = nullptr;
  if (opt.table == 3) {
    const qsor_status st = qsor_scheme_table(format, &raw);
    if (st != QSOR_OK) return report_error(st);
    return emit(to_string(Buffer(raw)), opt.out);
  }

  qsor_bench_config cfg;
  qsor_bench_config_init(&cfg);
  cfg.table = opt.table;
  cfg.iterations = opt.iterations;
  cfg.warmup = opt.warmup;
  cfg.hops = opt.hops;
  cfg.payload_len = opt.payload_len;
  cfg.include_frodo = opt.include_frodo ? 1 : 0;
  cfg.cycles_per_second = opt.cycles_per_second;
  cfg.measure_timing = opt.sizes_only ? 0 : 1;
  if (const auto seed = effective_seed(opt.seed)) cfg.seed = *seed;

  const auto classical = lookup_scheme(opt.classical);
  if (!classical) {
    std::cerr << "error: unknown scheme '" << opt.classical << "'\n";
    return kExitUsage;
  }
  cfg.classical_scheme = classical->scheme_id;

  std::vector<std::uint8_t> ids;
  for (const auto& name : opt.schemes) {
    const auto info = lookup_scheme(name);
    if (!info) {
      std::cerr << "error: unknown scheme '" << name << "'\n";
      return kExitUsage;
    }
    ids.push_back(info->scheme_id);
  }
  cfg.schemes = ids.empty() ? nullptr : ids.data();
  cfg.scheme_count = ids.size();

  const qsor_status st = qsor_bench_run(&cfg, format, &raw);
  if (st != QSOR_OK) return report_error(st);
  return emit(to_string(Buffer(raw)), opt.out);
}

bool load_scheme_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot read " << path << '\n';
    return false;
  }
  std::stringstream text;
  text << in.rdbuf();
  const auto st = qsor_registry_load_config(text.str().c_str());
  if (st != QSOR_OK) {
    report_error(st);
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Onion-circuit construction with classical, post-quantum and hybrid KEMs"};
  app.require_subcommand(1);
  std::string schemes_config;
  app.add_option("--schemes-config", schemes_config,
                 "Extra schemes, one `name id pk sk ct family` per line")
      ->check(CLI::ExistingFile);

  KeygenOptions keygen;
  auto* kg = app.add_subcommand("keygen", "Generate a KEM key pair and write <out>.pk / <out>.sk");
  kg->add_option("SCHEME", keygen.scheme, "Scheme name, e.g. kyber512");
  kg->add_option("--scheme", keygen.scheme, "Scheme name (alternative to the positional)");
  kg->add_option("--out", keygen.out, "Output path prefix");
  kg->add_option("--seed", keygen.seed, "Deterministic RNG seed (fallback: QSOR_SEED)");

  SimulateOptions sim;
  auto* sm = app.add_subcommand("simulate", "Run directory, relays and one circuit end to end");
  sm->add_option("--nodes", sim.nodes, "Relays to start")->capture_default_str();
  sm->add_option("--hops", sim.hops, "Circuit length")->capture_default_str()->check(CLI::PositiveNumber);
  sm->add_option("--protocol", sim.protocol, "so | qso | hso")
      ->capture_default_str()
      ->check(CLI::IsMember({"so", "qso", "hso"}, CLI::ignore_case));
  sm->add_option("--scheme", sim.scheme, "Scheme for the protocol's key (sets --classical or --pq)");
  sm->add_option("--classical", sim.classical, "Classical scheme")->capture_default_str();
  sm->add_option("--pq", sim.pq, "Post-quantum scheme")->capture_default_str();
  sm->add_option("--payload", sim.payload, "Payload text")->capture_default_str();
  sm->add_option("--transport", sim.transport, "inproc | tcp")
      ->capture_default_str()
      ->check(CLI::IsMember({"inproc", "tcp"}));
  sm->add_option("--tamper-hop", sim.tamper_hop, "Flip one bit in the first cell sent to this hop");
  sm->add_option("--timeout-ms", sim.timeout_ms, "Delivery timeout")->capture_default_str();
  sm->add_option("--format", sim.format, "text | json")
      ->capture_default_str()
      ->check(CLI::IsMember({"text", "json"}));
  sm->add_option("--seed", sim.seed, "Deterministic RNG seed (fallback: QSOR_SEED)");

  BenchOptions bench;
  auto* bm = app.add_subcommand("bench", "Print the scheme size table or run benchmarks");
  bm->add_option("--table", bench.table, "3 = sizes, 4 = KEM costs, 5 = circuit build")
      ->capture_default_str()
      ->check(CLI::IsMember({3, 4, 5}));
  bm->add_option("--iterations", bench.iterations, "Timed iterations per row")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bm->add_option("--warmup", bench.warmup, "Untimed warm-up iterations")->capture_default_str();
  bm->add_option("--hops", bench.hops, "Circuit length")->capture_default_str()->check(CLI::PositiveNumber);
  bm->add_option("--payload-len", bench.payload_len, "Payload bytes")->capture_default_str();
  bm->add_option("--scheme", bench.schemes, "Scheme(s) to include (repeatable)");
  bm->add_option("--classical", bench.classical, "Classical scheme for SO/HSO rows")->capture_default_str();
  bm->add_flag("--include-frodo", bench.include_frodo, "Add Frodo-640 rows");
  bm->add_flag("--sizes-only", bench.sizes_only, "Skip timing; size columns only");
  bm->add_option("--cycles-per-second", bench.cycles_per_second,
                 "Calibration for cycle columns, e.g. 2399753472")
      ->check(CLI::PositiveNumber);
  bm->add_option("--format", bench.format, "markdown | csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"markdown", "csv"}));
  bm->add_option("--out", bench.out, "Output file (default: stdout)");
  bm->add_option("--seed", bench.seed, "RNG seed (fallback: QSOR_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (!schemes_config.empty() && !load_scheme_config(schemes_config)) return kExitUsage;

  for (auto& c : sim.protocol) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  if (*kg) return cmd_keygen(keygen);
  if (*sm) return cmd_simulate(sim);
  return cmd_bench(bench);
}

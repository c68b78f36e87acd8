#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsor/kem.hpp"
#include "qsor/onion.hpp"

namespace qsor {

// Mean thread-CPU cost per operation. Benchmarks run on the calling thread.
struct BenchConfig {
  const SchemeRegistry* registry = &SchemeRegistry::builtin();
  std::size_t iterations = 1000;
  std::size_t warmup = 10;
  // KEM benchmark: schemes to time. Circuit benchmark: post-quantum schemes
  // for the QSO and HSO rows.
  std::vector<SchemeId> schemes;
  std::vector<Protocol> protocols{Protocol::so, Protocol::qso, Protocol::hso};
  SchemeId classical = schemes::rsa2048;
  std::size_t hops = kDefaultHops;
  std::size_t payload_len = 64;
  std::optional<double> cycles_per_second;
  // When false only the size columns are filled; output is then a pure
  // function of the configuration.
  bool measure_timing = true;
  std::uint64_t seed = 1;

  // Throws invalid_argument on iterations == 0, hops == 0 or unknown schemes.
  void validate() const;
};

// Schemes of the published KEM cost table (no Frodo).
std::vector<SchemeId> default_kem_schemes();
// Post-quantum schemes of the published circuit-build table (no Frodo).
std::vector<SchemeId> default_circuit_schemes();
std::vector<SchemeId> frodo_schemes();

struct KemBenchRow {
  std::string scheme;
  double encapsulate_ns = 0;
  double decapsulate_ns = 0;
  double keygen_ns = 0;
};

struct CircuitBenchRow {
  std::string label;
  Protocol protocol = Protocol::so;
  double wrap_ns = 0;
  double remove_one_layer_ns = 0;
  double total_build_ns = 0;
  double total_build_wall_s = 0;
  std::size_t message_size = 0;
  std::size_t packets_paper_metric = 0;
  std::size_t packets_transport_metric = 0;
  bool has_reference_row = true;
};

struct BenchReport {
  enum class Kind { kem, circuit };
  Kind kind = Kind::circuit;
  std::size_t iterations = 0;
  std::size_t warmup = 0;
  bool timed = true;
  std::optional<double> cycles_per_second;
  std::vector<KemBenchRow> kem_rows;
  std::vector<CircuitBenchRow> circuit_rows;
};

BenchReport bench_kem(const BenchConfig& config);
BenchReport bench_circuit(const BenchConfig& config);

enum class ReportFormat { csv, markdown };
ReportFormat parse_report_format(std::string_view text);

std::string emit_report(const BenchReport& report, ReportFormat format);
// Scheme size table: name, public key, private key, ciphertext sizes.
std::string emit_scheme_table(const SchemeRegistry& registry, ReportFormat format);
// Throws io_error if the file cannot be written.
void write_text_file(const std::string& path, std::string_view text);

double ns_to_cycles(double ns, double cycles_per_second) noexcept;

}  // namespace qsor

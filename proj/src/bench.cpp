#include "qsor/bench.hpp"

#include <time.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "qsor/cell.hpp"
#include "qsor/error.hpp"

namespace qsor {
namespace {

std::int64_t thread_cpu_ns() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return std::int64_t{ts.tv_sec} * 1'000'000'000 + ts.tv_nsec;
}

// Accumulates thread-CPU time of timed regions.
class CpuTimer {
 public:
  template <typename F>
  decltype(auto) time(F&& f) {
    const auto start = thread_cpu_ns();
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      f();
      total_ += thread_cpu_ns() - start;
    } else {
      auto r = f();
      total_ += thread_cpu_ns() - start;
      return r;
    }
  }
  double mean(std::size_t n) const { return static_cast<double>(total_) / static_cast<double>(n); }

 private:
  std::int64_t total_ = 0;
};

bool has_reference_row(SchemeId id) {
  const auto refs = default_circuit_schemes();
  return std::find(refs.begin(), refs.end(), id) != refs.end();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string render(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows, ReportFormat format,
                   const std::string& caption) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }
  if (!caption.empty()) out << caption << "\n\n";
  auto line = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
  };
  line(header);
  out << '|';
  for (const auto& h : header) {
    const bool text = h == "Scheme" || h == "Protocol" || h == "Note";
    out << (text ? "---|" : "---:|");
  }
  out << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string clock_caption(const BenchReport& report) {
  if (!report.timed) return "Size columns only (timing disabled).";
  std::ostringstream c;
  c << "Clock: thread CPU time, mean of " << report.iterations << " iterations after "
    << report.warmup << " warm-up iterations.";
  if (report.cycles_per_second) {
    c << " Cycles = ns x " << fixed(*report.cycles_per_second, 0) << " / 1e9 (calibration).";
  } else {
    c << " No cycle calibration.";
  }
  return c.str();
}

}  // namespace

double ns_to_cycles(double ns, double cycles_per_second) noexcept {
  return ns * cycles_per_second / 1e9;
}

std::vector<SchemeId> default_kem_schemes() {
  return {schemes::rsa1024,        schemes::rsa2048,         schemes::kyber512,
          schemes::newhope512_cca, schemes::ntru_hps2048509, schemes::sike_p503};
}

std::vector<SchemeId> default_circuit_schemes() {
  return {schemes::kyber512, schemes::newhope512_cca, schemes::ntru_hps2048509,
          schemes::sike_p503};
}

std::vector<SchemeId> frodo_schemes() { return {schemes::frodo640_aes, schemes::frodo640_shake}; }

void BenchConfig::validate() const {
  if (iterations == 0) throw Error(Errc::invalid_argument, "iterations must be at least 1");
  if (hops == 0) throw Error(Errc::invalid_argument, "hops must be at least 1");
  if (cycles_per_second && !(*cycles_per_second > 0)) {
    throw Error(Errc::invalid_argument, "cycles per second must be positive");
  }
  registry->profile(classical);
  for (auto id : schemes) registry->profile(id);
}

BenchReport bench_kem(const BenchConfig& config) {
  config.validate();
  const auto& registry = *config.registry;
  SeededRng rng(config.seed);
  BenchReport report;
  report.kind = BenchReport::Kind::kem;
  report.iterations = config.iterations;
  report.warmup = config.warmup;
  report.timed = config.measure_timing;
  report.cycles_per_second = config.cycles_per_second;

  const auto ids = config.schemes.empty() ? default_kem_schemes() : config.schemes;
  for (auto id : ids) {
    KemBenchRow row;
    row.scheme = registry.profile(id).name;
    if (config.measure_timing) {
      for (std::size_t i = 0; i < config.warmup; ++i) {
        const auto kp = keygen(registry, id, rng);
        decapsulate(registry, kp.private_key, encapsulate(registry, kp.public_key, rng).ciphertext);
      }
      CpuTimer kg, enc, dec;
      for (std::size_t i = 0; i < config.iterations; ++i) {
        const auto kp = kg.time([&] { return keygen(registry, id, rng); });
        const auto e = enc.time([&] { return encapsulate(registry, kp.public_key, rng); });
        const auto s = dec.time([&] { return decapsulate(registry, kp.private_key, e.ciphertext); });
        if (!(s == e.secret)) throw Error(Errc::internal, row.scheme + ": KEM round trip failed");
      }
      row.keygen_ns = kg.mean(config.iterations);
      row.encapsulate_ns = enc.mean(config.iterations);
      row.decapsulate_ns = dec.mean(config.iterations);
    }
    report.kem_rows.push_back(std::move(row));
  }
  return report;
}

BenchReport bench_circuit(const BenchConfig& config) {
  config.validate();
  const auto& registry = *config.registry;
  SeededRng rng(config.seed);
  BenchReport report;
  report.kind = BenchReport::Kind::circuit;
  report.iterations = config.iterations;
  report.warmup = config.warmup;
  report.timed = config.measure_timing;
  report.cycles_per_second = config.cycles_per_second;

  const auto pq_ids = config.schemes.empty() ? default_circuit_schemes() : config.schemes;
  const Bytes payload(config.payload_len, 0x42);

  struct RowSpec {
    Protocol protocol;
    std::optional<SchemeId> pq;
  };
  std::vector<RowSpec> specs;
  for (auto protocol : {Protocol::so, Protocol::qso, Protocol::hso}) {
    if (std::find(config.protocols.begin(), config.protocols.end(), protocol) ==
        config.protocols.end()) {
      continue;
    }
    if (protocol == Protocol::so) {
      specs.push_back({protocol, std::nullopt});
    } else {
      for (auto id : pq_ids) specs.push_back({protocol, id});
    }
  }

  for (const auto& spec : specs) {
    CircuitBenchRow row;
    row.protocol = spec.protocol;
    if (spec.protocol == Protocol::so) {
      row.label = "Original";
    } else {
      const auto& name = registry.profile(*spec.pq).name;
      row.label = spec.protocol == Protocol::hso ? "Hybrid " + name : name;
      row.has_reference_row = has_reference_row(*spec.pq);
    }

    std::vector<NodeKeys> nodes(config.hops);
    std::vector<HopSpec> hops(config.hops);
    for (std::size_t h = 0; h < config.hops; ++h) {
      hops[h].address = "relay" + std::to_string(h + 1);
      if (spec.protocol != Protocol::qso) {
        nodes[h].classical = keygen(registry, config.classical, rng);
        hops[h].classical_key = nodes[h].classical->public_key;
      }
      if (spec.protocol != Protocol::so) {
        nodes[h].post_quantum = keygen(registry, *spec.pq, rng);
        hops[h].pq_key = nodes[h].post_quantum->public_key;
      }
    }

    row.message_size = onion_size(registry, spec.protocol, std::span<const HopSpec>(hops), payload.size());
    row.packets_paper_metric = packets_needed_paper_metric(row.message_size);
    row.packets_transport_metric = packets_needed_transport_metric(row.message_size);

    if (config.measure_timing) {
      auto build = [&](CpuTimer* wrap_t, CpuTimer* first_t, CpuTimer* rest_t) {
        CpuTimer scratch;
        auto onion = (wrap_t ? *wrap_t : scratch).time(
            [&] { return wrap(registry, payload, hops, spec.protocol, rng); });
        if (onion.bytes.size() != row.message_size) {
          throw Error(Errc::internal, row.label + ": onion size disagrees with onion_size");
        }
        Bytes layer = std::move(onion.bytes);
        for (std::size_t h = 0; h < config.hops; ++h) {
          CpuTimer& t = h == 0 ? (first_t ? *first_t : scratch) : (rest_t ? *rest_t : scratch);
          auto peeled = t.time([&] { return unwrap_layer(registry, nodes[h], layer); });
          layer = std::move(peeled.inner);
        }
        if (layer != payload) throw Error(Errc::internal, row.label + ": circuit round trip failed");
      };
      for (std::size_t i = 0; i < config.warmup; ++i) build(nullptr, nullptr, nullptr);

      CpuTimer wrap_t, first_t, rest_t;
      std::chrono::steady_clock::duration wall{};
      for (std::size_t i = 0; i < config.iterations; ++i) {
        const auto start = std::chrono::steady_clock::now();
        build(&wrap_t, &first_t, &rest_t);
        wall += std::chrono::steady_clock::now() - start;
      }
      row.wrap_ns = wrap_t.mean(config.iterations);
      row.remove_one_layer_ns = first_t.mean(config.iterations);
      row.total_build_ns = row.wrap_ns + row.remove_one_layer_ns + rest_t.mean(config.iterations);
      row.total_build_wall_s =
          std::chrono::duration<double>(wall).count() / static_cast<double>(config.iterations);
    }
    report.circuit_rows.push_back(std::move(row));
  }
  return report;
}

ReportFormat parse_report_format(std::string_view text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "csv") return ReportFormat::csv;
  if (lower == "markdown" || lower == "md") return ReportFormat::markdown;
  throw Error(Errc::invalid_argument, "unknown format " + std::string(text));
}

std::string emit_report(const BenchReport& report, ReportFormat format) {
  const auto cps = report.cycles_per_second;
  auto timing = [&](double ns) { return report.timed ? fixed(ns, 0) : std::string(); };
  auto cycles = [&](double ns) { return report.timed ? fixed(ns_to_cycles(ns, *cps), 0) : std::string(); };

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  if (report.kind == BenchReport::Kind::kem) {
    header = {"Scheme", "Encapsulation [ns]", "Decapsulation [ns]", "Key generation [ns]"};
    if (cps) {
      for (const char* h : {"Encapsulation [cycles]", "Decapsulation [cycles]",
                            "Key generation [cycles]"}) {
        header.emplace_back(h);
      }
    }
    for (const auto& r : report.kem_rows) {
      std::vector<std::string> cells{r.scheme, timing(r.encapsulate_ns), timing(r.decapsulate_ns),
                                     timing(r.keygen_ns)};
      if (cps) {
        cells.push_back(cycles(r.encapsulate_ns));
        cells.push_back(cycles(r.decapsulate_ns));
        cells.push_back(cycles(r.keygen_ns));
      }
      rows.push_back(std::move(cells));
    }
  } else {
    header = {"Scheme",
              "Protocol",
              "Wrap encryption layers [ns]",
              "Remove one layer [ns]",
              "Total circuit build [ns]",
              "Message size (bytes)",
              "Packets needed",
              "Packets needed (502-byte cell payload)",
              "Time needed [s]"};
    if (cps) {
      for (const char* h : {"Wrap encryption layers [cycles]", "Remove one layer [cycles]",
                            "Total circuit build [cycles]"}) {
        header.emplace_back(h);
      }
    }
    header.emplace_back("Note");
    for (const auto& r : report.circuit_rows) {
      std::vector<std::string> cells{r.label,
                                     protocol_name(r.protocol),
                                     timing(r.wrap_ns),
                                     timing(r.remove_one_layer_ns),
                                     timing(r.total_build_ns),
                                     std::to_string(r.message_size),
                                     std::to_string(r.packets_paper_metric),
                                     std::to_string(r.packets_transport_metric),
                                     report.timed ? fixed(r.total_build_wall_s, 6) : std::string()};
      if (cps) {
        cells.push_back(cycles(r.wrap_ns));
        cells.push_back(cycles(r.remove_one_layer_ns));
        cells.push_back(cycles(r.total_build_ns));
      }
      cells.emplace_back(r.has_reference_row ? "" : "not in reference table");
      rows.push_back(std::move(cells));
    }
  }
  return render(header, rows, format, clock_caption(report));
}

std::string emit_scheme_table(const SchemeRegistry& registry, ReportFormat format) {
  std::vector<std::string> header{"Scheme", "Public key size (bytes)", "Private key size (bytes)",
                                  "Ciphertext size (bytes)"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : registry.profiles()) {
    rows.push_back({p.name, std::to_string(p.public_key_size), std::to_string(p.private_key_size),
                    std::to_string(p.ciphertext_size)});
  }
  return render(header, rows, format, "");
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::io_error, "write to " + path + " failed");
}

}  // namespace qsor

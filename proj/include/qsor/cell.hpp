#pragma once

// Fixed 512-byte transport cells.
//
//   circuit_id(4) | seq(2) | total(2) | frag_len(2) | payload(502, zero padded)

#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsor/bytes.hpp"

namespace qsor {

inline constexpr std::size_t kCellSize = 512;
inline constexpr std::size_t kCellHeaderSize = 10;
inline constexpr std::size_t kCellPayloadSize = kCellSize - kCellHeaderSize;
inline constexpr std::size_t kMaxCellsPerMessage = 0xffff;
inline constexpr std::uint32_t kDirectoryCircuit = 0;

struct Cell {
  std::uint32_t circuit_id = 0;
  std::uint16_t seq = 0;
  std::uint16_t total = 0;
  std::uint16_t frag_len = 0;
  std::array<std::uint8_t, kCellPayloadSize> payload{};

  using Wire = std::array<std::uint8_t, kCellSize>;

  Wire serialize() const;
  // Rejects anything but exactly 512 bytes, seq >= total, or frag_len > 502.
  static Cell parse(ByteView wire);

  ByteView fragment() const { return ByteView(payload).first(frag_len); }
};

// Splits a message into ceil(len / 502) cells. Errors: empty or oversize message.
std::vector<Cell> fragment(ByteView message, std::uint32_t circuit_id);

// Reassembles a complete cell set in any order.
Bytes reassemble(std::span<const Cell> cells);

// Packets as counted for the published circuit-build measurements:
// ceil(size / 512), ignoring cell headers.
std::size_t packets_needed_paper_metric(std::size_t message_size) noexcept;
// Cells actually emitted by fragment(): ceil(size / 502).
std::size_t packets_needed_transport_metric(std::size_t message_size) noexcept;

// Per-(peer, circuit) reassembly buffers with a timeout.
class Reassembler {
 public:
  using Clock = std::chrono::steady_clock;

  struct Options {
    std::chrono::milliseconds timeout{5000};
    // When set, a cell with seq != 0 for a circuit with no open buffer is
    // dropped instead of opening one.
    bool require_first_cell = false;
  };

  enum class Outcome { pending, complete, dropped };

  struct Result {
    Outcome outcome = Outcome::pending;
    Bytes message;  // set when complete
  };

  Reassembler() = default;
  explicit Reassembler(Options options) : options_(options) {}

  Result accept(const std::string& peer, const Cell& cell, Clock::time_point now = Clock::now());
  // Discards buffers idle longer than the timeout; returns how many.
  std::size_t expire(Clock::time_point now = Clock::now());
  void drop(const std::string& peer, std::uint32_t circuit_id);
  std::size_t open_buffers() const noexcept { return buffers_.size(); }

 private:
  struct Buffer {
    std::uint16_t total = 0;
    std::size_t received = 0;
    std::vector<std::optional<Bytes>> parts;
    Clock::time_point last_activity;
  };

  Options options_;
  std::map<std::pair<std::string, std::uint32_t>, Buffer> buffers_;
};

}  // namespace qsor

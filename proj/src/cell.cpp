#include "qsor/cell.hpp"

#include <algorithm>
#include <cstring>

#include "qsor/error.hpp"

namespace qsor {

Cell::Wire Cell::serialize() const {
  Wire w{};
  Bytes header;
  header.reserve(kCellHeaderSize);
  put_u32(header, circuit_id);
  put_u16(header, seq);
  put_u16(header, total);
  put_u16(header, frag_len);
  std::copy(header.begin(), header.end(), w.begin());
  std::copy(payload.begin(), payload.end(), w.begin() + kCellHeaderSize);
  return w;
}

Cell Cell::parse(ByteView wire) {
  if (wire.size() != kCellSize) {
    throw Error(Errc::malformed, "cell must be exactly 512 bytes, got " + std::to_string(wire.size()));
  }
  Cell c;
  c.circuit_id = get_u32(wire.data());
  c.seq = get_u16(wire.data() + 4);
  c.total = get_u16(wire.data() + 6);
  c.frag_len = get_u16(wire.data() + 8);
  if (c.seq >= c.total) throw Error(Errc::malformed, "cell seq out of range");
  if (c.frag_len > kCellPayloadSize) throw Error(Errc::malformed, "cell frag_len exceeds 502");
  std::copy(wire.begin() + kCellHeaderSize, wire.end(), c.payload.begin());
  return c;
}

std::vector<Cell> fragment(ByteView message, std::uint32_t circuit_id) {
  if (message.empty()) throw Error(Errc::invalid_argument, "cannot fragment an empty message");
  const std::size_t count = packets_needed_transport_metric(message.size());
  if (count > kMaxCellsPerMessage) {
    throw Error(Errc::payload_too_large, "message needs more than 65535 cells");
  }
  std::vector<Cell> cells(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& c = cells[i];
    const std::size_t off = i * kCellPayloadSize;
    const std::size_t n = std::min(kCellPayloadSize, message.size() - off);
    c.circuit_id = circuit_id;
    c.seq = static_cast<std::uint16_t>(i);
    c.total = static_cast<std::uint16_t>(count);
    c.frag_len = static_cast<std::uint16_t>(n);
    std::memcpy(c.payload.data(), message.data() + off, n);
  }
  return cells;
}

Bytes reassemble(std::span<const Cell> cells) {
  Reassembler r;
  for (const auto& c : cells) {
    auto res = r.accept("", c);
    if (res.outcome == Reassembler::Outcome::complete) return std::move(res.message);
    if (res.outcome == Reassembler::Outcome::dropped) break;
  }
  throw Error(Errc::malformed, "cell set is incomplete or inconsistent");
}

std::size_t packets_needed_paper_metric(std::size_t message_size) noexcept {
  return (message_size + kCellSize - 1) / kCellSize;
}

std::size_t packets_needed_transport_metric(std::size_t message_size) noexcept {
  return (message_size + kCellPayloadSize - 1) / kCellPayloadSize;
}

Reassembler::Result Reassembler::accept(const std::string& peer, const Cell& cell,
                                        Clock::time_point now) {
  if (cell.total == 0 || cell.seq >= cell.total || cell.frag_len > kCellPayloadSize) {
    return {Outcome::dropped, {}};
  }
  const auto key = std::make_pair(peer, cell.circuit_id);
  auto it = buffers_.find(key);
  if (it == buffers_.end()) {
    if (options_.require_first_cell && cell.seq != 0) return {Outcome::dropped, {}};
    Buffer b;
    b.total = cell.total;
    b.parts.resize(cell.total);
    it = buffers_.emplace(key, std::move(b)).first;
  }
  auto& buf = it->second;
  if (buf.total != cell.total) {
    buffers_.erase(it);
    return {Outcome::dropped, {}};
  }
  buf.last_activity = now;
  auto& slot = buf.parts[cell.seq];
  if (!slot) {
    slot = Bytes(cell.payload.begin(), cell.payload.begin() + cell.frag_len);
    ++buf.received;
  }
  if (buf.received < buf.total) return {Outcome::pending, {}};

  Result done{Outcome::complete, {}};
  for (auto& part : buf.parts) append(done.message, *part);
  buffers_.erase(it);
  return done;
}

std::size_t Reassembler::expire(Clock::time_point now) {
  return std::erase_if(buffers_, [&](const auto& entry) {
    return now - entry.second.last_activity > options_.timeout;
  });
}

void Reassembler::drop(const std::string& peer, std::uint32_t circuit_id) {
  buffers_.erase(std::make_pair(peer, circuit_id));
}

}  // namespace qsor

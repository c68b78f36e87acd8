#include "qsor/rng.hpp"

#include <openssl/rand.h>

#include <algorithm>
#include <cstring>

#include "qsor/crypto.hpp"
#include "qsor/error.hpp"

namespace qsor {

std::uint64_t Rng::next_u64() {
  std::array<std::uint8_t, 8> raw{};
  fill(raw);
  std::uint64_t v = 0;
  for (auto b : raw) v = (v << 8) | b;
  return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_argument, "uniform: bound must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

SeededRng::SeededRng(std::uint64_t seed) {
  std::array<std::uint8_t, 8> raw{};
  for (int i = 0; i < 8; ++i) raw[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seed >> (8 * i));
  static constexpr char kLabel[] = "qsor/seeded-rng";
  key_ = crypto::sha256({as_bytes(kLabel), raw});
}

void SeededRng::refill() {
  // Each refill keys a fresh keystream from (key, counter).
  std::array<std::uint8_t, 8> counter{};
  for (int i = 0; i < 8; ++i) counter[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(block_counter_ >> (8 * i));
  ++block_counter_;
  const auto block_key = crypto::sha256({key_, counter});
  crypto::keystream(block_key, buffer_);
  used_ = 0;
}

void SeededRng::fill(std::span<std::uint8_t> out) {
  std::size_t pos = 0;
  while (pos < out.size()) {
    if (used_ == buffer_.size()) refill();
    const std::size_t n = std::min(out.size() - pos, buffer_.size() - used_);
    std::memcpy(out.data() + pos, buffer_.data() + used_, n);
    used_ += n;
    pos += n;
  }
}

void SystemRng::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(Errc::internal, "RAND_bytes failed");
  }
}

}  // namespace qsor

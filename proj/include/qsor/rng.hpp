#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace qsor {

// Randomness source injected into every operation that needs one. Not
// thread-safe; give each thread its own instance.
class Rng {
 public:
  virtual ~Rng() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::uint64_t next_u64();
  // Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
};

// Deterministic stream: ChaCha20 keystream keyed by SHA-256 of the seed.
class SeededRng final : public Rng {
 public:
  explicit SeededRng(std::uint64_t seed);
  void fill(std::span<std::uint8_t> out) override;

 private:
  void refill();

  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, 256> buffer_{};
  std::size_t used_ = 256;
};

// Operating-system entropy via OpenSSL RAND_bytes.
class SystemRng final : public Rng {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

}  // namespace qsor

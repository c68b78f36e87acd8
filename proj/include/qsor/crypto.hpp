#pragma once

// Thin wrappers over OpenSSL: SHA-256, AES-256-GCM, a ChaCha20 keystream used
// for deterministic filler bytes, and base64.

#include <array>
#include <initializer_list>
#include <optional>
#include <string>

#include "qsor/bytes.hpp"

namespace qsor::crypto {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;

using Digest = std::array<std::uint8_t, kDigestSize>;

// SHA-256 over the concatenation of the given parts.
Digest sha256(std::initializer_list<ByteView> parts);

// Fills `out` with the ChaCha20 keystream for (key, zero nonce).
void keystream(ByteView key, std::span<std::uint8_t> out);

// AES-256-GCM. Output of seal is ciphertext || 16-byte tag.
Bytes aead_seal(ByteView key, ByteView nonce, ByteView aad, ByteView plaintext);
std::optional<Bytes> aead_open(ByteView key, ByteView nonce, ByteView aad, ByteView sealed);

std::string base64_encode(ByteView data);
std::optional<Bytes> base64_decode(std::string_view text);

}  // namespace qsor::crypto

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qsor/bytes.hpp"
#include "qsor/rng.hpp"

namespace qsor {

struct SchemeId {
  std::uint8_t value = 0;
  friend auto operator<=>(const SchemeId&, const SchemeId&) = default;
};

namespace schemes {
inline constexpr SchemeId rsa1024{1};
inline constexpr SchemeId rsa2048{2};
inline constexpr SchemeId frodo640_aes{3};
inline constexpr SchemeId frodo640_shake{4};
inline constexpr SchemeId kyber512{5};
inline constexpr SchemeId newhope512_cca{6};
inline constexpr SchemeId ntru_hps2048509{7};
inline constexpr SchemeId sike_p503{8};
}  // namespace schemes

enum class SchemeFamily : std::uint8_t { classical, lattice, isogeny };

const char* family_name(SchemeFamily family) noexcept;

struct SchemeProfile {
  SchemeId id;
  std::string name;
  std::size_t public_key_size = 0;
  std::size_t private_key_size = 0;
  std::size_t ciphertext_size = 0;
  SchemeFamily family = SchemeFamily::classical;
  // Alternative spellings accepted by SchemeRegistry::lookup.
  std::vector<std::string> aliases;
};

struct PublicKey {
  SchemeId scheme;
  Bytes bytes;
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct PrivateKey {
  SchemeId scheme;
  Bytes bytes;
  friend bool operator==(const PrivateKey&, const PrivateKey&) = default;
};

struct KemKeyPair {
  PublicKey public_key;
  PrivateKey private_key;
};

struct KemCiphertext {
  SchemeId scheme;
  Bytes bytes;
};

// 256-bit symmetric key produced by encapsulation.
class SharedSecret {
 public:
  static constexpr std::size_t kSize = 32;
  using Array = std::array<std::uint8_t, kSize>;

  SharedSecret() = default;
  explicit SharedSecret(const Array& key) : key_(key) {}

  static SharedSecret random(Rng& rng);

  const Array& bytes() const noexcept { return key_; }
  ByteView view() const noexcept { return key_; }

  friend bool operator==(const SharedSecret&, const SharedSecret&) = default;

 private:
  Array key_{};
};

struct Encapsulation {
  KemCiphertext ciphertext;
  SharedSecret secret;
};

// One classical and one post-quantum scheme whose secrets are XOR-combined.
struct HybridScheme {
  SchemeId classical;
  SchemeId post_quantum;
};

struct HybridEncapsulation {
  KemCiphertext classical;     // c'
  KemCiphertext post_quantum;  // c''
  SharedSecret secret;         // K1 xor K2
};

// Pluggable KEM implementation. The registry hands each backend the profile of
// the scheme it is serving; implementations must emit exactly profile-sized
// keys and ciphertexts.
class KemBackend {
 public:
  virtual ~KemBackend() = default;
  virtual KemKeyPair keygen(const SchemeProfile& profile, Rng& rng) const = 0;
  virtual Encapsulation encapsulate(const SchemeProfile& profile, const PublicKey& pk,
                                    Rng& rng) const = 0;
  virtual SharedSecret decapsulate(const SchemeProfile& profile, const PrivateKey& sk,
                                   const KemCiphertext& ct) const = 0;
};

// Size-faithful stand-in for a real KEM. Keys are a 32-byte seed (or its hash)
// padded with seed-derived filler; ciphertexts carry a nonce, the secret masked
// under a key-derived keystream, filler, and a 16-byte checksum over everything
// else. Any modified ciphertext bit fails the checksum; a ciphertext opened
// under the wrong private key passes it and yields an unrelated secret.
//
// Models sizes and failure behaviour only. Provides no confidentiality against
// anyone holding the public key.
class ProfileKem final : public KemBackend {
 public:
  static constexpr std::size_t kSeedSize = 32;
  static constexpr std::size_t kNonceSize = 16;
  static constexpr std::size_t kChecksumSize = 16;
  static constexpr std::size_t kMinCiphertextSize = kNonceSize + SharedSecret::kSize + kChecksumSize;

  KemKeyPair keygen(const SchemeProfile& profile, Rng& rng) const override;
  Encapsulation encapsulate(const SchemeProfile& profile, const PublicKey& pk,
                            Rng& rng) const override;
  SharedSecret decapsulate(const SchemeProfile& profile, const PrivateKey& sk,
                           const KemCiphertext& ct) const override;
};

class SchemeRegistry {
 public:
  // The eight schemes of the evaluated size table, RSA bounds fixed at 128/256.
  static const SchemeRegistry& builtin();
  static SchemeRegistry with_builtins();

  SchemeRegistry() = default;

  // Registers a scheme; throws on duplicate id or name, zero sizes, or sizes
  // too small for the profile backend when `backend` is null.
  void add(SchemeProfile profile, std::shared_ptr<const KemBackend> backend = nullptr);

  // Parses one scheme per line: `name scheme_id pk_size sk_size ct_size family`.
  // Blank lines and lines starting with '#' are ignored.
  void load_config(std::string_view text);

  const SchemeProfile* find(SchemeId id) const noexcept;
  const SchemeProfile& profile(SchemeId id) const;
  // Case-insensitive, ignores '-' and '_'; matches names and aliases.
  const SchemeProfile& lookup(std::string_view name) const;
  const KemBackend& backend(SchemeId id) const;

  const std::vector<SchemeProfile>& profiles() const noexcept { return profiles_; }

 private:
  std::vector<SchemeProfile> profiles_;
  std::vector<std::shared_ptr<const KemBackend>> backends_;
};

KemKeyPair keygen(const SchemeRegistry& registry, SchemeId scheme, Rng& rng);
Encapsulation encapsulate(const SchemeRegistry& registry, const PublicKey& pk, Rng& rng);
SharedSecret decapsulate(const SchemeRegistry& registry, const PrivateKey& sk,
                         const KemCiphertext& ct);

SharedSecret hybrid_combine(const SharedSecret& k1, const SharedSecret& k2) noexcept;

// Throws unless `classical` is a registered classical scheme and `post_quantum`
// a registered non-classical one.
void validate_hybrid(const SchemeRegistry& registry, const HybridScheme& hybrid);

HybridEncapsulation hybrid_encapsulate(const SchemeRegistry& registry, const HybridScheme& hybrid,
                                       const PublicKey& pk_classical, const PublicKey& pk_pq,
                                       Rng& rng);
SharedSecret hybrid_decapsulate(const SchemeRegistry& registry, const PrivateKey& sk_classical,
                                const PrivateKey& sk_pq, const KemCiphertext& ct_classical,
                                const KemCiphertext& ct_pq);

// Raw key import, length-checked against the profile.
PublicKey import_public_key(const SchemeRegistry& registry, SchemeId scheme, ByteView bytes);
PrivateKey import_private_key(const SchemeRegistry& registry, SchemeId scheme, ByteView bytes);

}  // namespace qsor

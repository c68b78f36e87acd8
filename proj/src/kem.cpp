#include "qsor/kem.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "qsor/crypto.hpp"
#include "qsor/error.hpp"

namespace qsor {
namespace {

constexpr std::string_view kPkLabel = "qsor/profile-kem/pk";
constexpr std::string_view kPkPadLabel = "qsor/profile-kem/pk-pad";
constexpr std::string_view kSkPadLabel = "qsor/profile-kem/sk-pad";
constexpr std::string_view kSealLabel = "qsor/profile-kem/seal";
constexpr std::string_view kMaskLabel = "qsor/profile-kem/mask";
constexpr std::string_view kCtPadLabel = "qsor/profile-kem/ct-pad";
constexpr std::string_view kCheckLabel = "qsor/profile-kem/check";

std::string normalize(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

void pad_from(std::string_view label, ByteView seed, std::span<std::uint8_t> out) {
  const auto key = crypto::sha256({as_bytes(label), seed});
  crypto::keystream(key, out);
}

crypto::Digest key_tag(SchemeId id, ByteView seed) {
  const std::uint8_t sid[1] = {id.value};
  return crypto::sha256({as_bytes(kPkLabel), sid, seed});
}

SharedSecret::Array mask_for(ByteView tag, ByteView nonce) {
  const auto seal_key = crypto::sha256({as_bytes(kSealLabel), tag});
  return crypto::sha256({as_bytes(kMaskLabel), seal_key, nonce});
}

crypto::Digest checksum(SchemeId id, ByteView body) {
  const std::uint8_t sid[1] = {id.value};
  return crypto::sha256({as_bytes(kCheckLabel), sid, body});
}

void require_length(const SchemeProfile& profile, std::size_t actual, std::size_t expected,
                    const char* what) {
  if (actual != expected) {
    std::ostringstream msg;
    msg << profile.name << ": " << what << " is " << actual << " bytes, expected " << expected;
    throw Error(Errc::length_mismatch, msg.str());
  }
}

void require_scheme(const SchemeProfile& profile, SchemeId actual) {
  if (actual != profile.id) {
    throw Error(Errc::invalid_argument,
                "key or ciphertext belongs to scheme " + std::to_string(actual.value) +
                    ", not " + profile.name);
  }
}

const ProfileKem& profile_kem() {
  static const ProfileKem kem;
  return kem;
}

std::shared_ptr<const KemBackend> shared_profile_kem() {
  static const std::shared_ptr<const KemBackend> kem(&profile_kem(), [](const KemBackend*) {});
  return kem;
}

}  // namespace

const char* family_name(SchemeFamily family) noexcept {
  switch (family) {
    case SchemeFamily::classical: return "classical";
    case SchemeFamily::lattice: return "lattice";
    case SchemeFamily::isogeny: return "isogeny";
  }
  return "unknown";
}

SharedSecret SharedSecret::random(Rng& rng) {
  Array key{};
  rng.fill(key);
  return SharedSecret(key);
}

// ---------------------------------------------------------------------------
// ProfileKem

KemKeyPair ProfileKem::keygen(const SchemeProfile& profile, Rng& rng) const {
  std::array<std::uint8_t, kSeedSize> seed{};
  rng.fill(seed);

  KemKeyPair kp{{profile.id, Bytes(profile.public_key_size)},
                {profile.id, Bytes(profile.private_key_size)}};
  const auto tag = key_tag(profile.id, seed);
  std::copy(tag.begin(), tag.end(), kp.public_key.bytes.begin());
  pad_from(kPkPadLabel, seed, std::span(kp.public_key.bytes).subspan(tag.size()));

  std::copy(seed.begin(), seed.end(), kp.private_key.bytes.begin());
  pad_from(kSkPadLabel, seed, std::span(kp.private_key.bytes).subspan(seed.size()));
  return kp;
}

Encapsulation ProfileKem::encapsulate(const SchemeProfile& profile, const PublicKey& pk,
                                      Rng& rng) const {
  require_scheme(profile, pk.scheme);
  require_length(profile, pk.bytes.size(), profile.public_key_size, "public key");

  const auto secret = SharedSecret::random(rng);
  Bytes ct(profile.ciphertext_size);
  auto nonce = std::span(ct).first(kNonceSize);
  rng.fill(nonce);

  const auto mask = mask_for(ByteView(pk.bytes).first(crypto::kDigestSize), nonce);
  auto masked = std::span(ct).subspan(kNonceSize, SharedSecret::kSize);
  for (std::size_t i = 0; i < SharedSecret::kSize; ++i) masked[i] = secret.bytes()[i] ^ mask[i];

  const std::size_t body = ct.size() - kChecksumSize;
  pad_from(kCtPadLabel, nonce,
           std::span(ct).subspan(kNonceSize + SharedSecret::kSize, body - kNonceSize - SharedSecret::kSize));
  const auto sum = checksum(profile.id, ByteView(ct).first(body));
  std::copy_n(sum.begin(), kChecksumSize, ct.begin() + static_cast<std::ptrdiff_t>(body));

  return {{profile.id, std::move(ct)}, secret};
}

SharedSecret ProfileKem::decapsulate(const SchemeProfile& profile, const PrivateKey& sk,
                                     const KemCiphertext& ct) const {
  require_scheme(profile, sk.scheme);
  require_scheme(profile, ct.scheme);
  require_length(profile, sk.bytes.size(), profile.private_key_size, "private key");
  require_length(profile, ct.bytes.size(), profile.ciphertext_size, "ciphertext");

  const std::size_t body = ct.bytes.size() - kChecksumSize;
  const auto sum = checksum(profile.id, ByteView(ct.bytes).first(body));
  if (CRYPTO_memcmp(sum.data(), ct.bytes.data() + body, kChecksumSize) != 0) {
    throw Error(Errc::integrity_failure, profile.name + ": ciphertext integrity check failed");
  }

  const auto tag = key_tag(profile.id, ByteView(sk.bytes).first(kSeedSize));
  const auto mask = mask_for(tag, ByteView(ct.bytes).first(kNonceSize));
  SharedSecret::Array key{};
  for (std::size_t i = 0; i < SharedSecret::kSize; ++i) key[i] = ct.bytes[kNonceSize + i] ^ mask[i];
  return SharedSecret(key);
}

// ---------------------------------------------------------------------------
// SchemeRegistry

const SchemeRegistry& SchemeRegistry::builtin() {
  static const SchemeRegistry registry = with_builtins();
  return registry;
}

SchemeRegistry SchemeRegistry::with_builtins() {
  using F = SchemeFamily;
  SchemeRegistry r;
  r.add({schemes::rsa1024, "RSA-1024", 128, 128, 128, F::classical, {"rsa"}});
  r.add({schemes::rsa2048, "RSA-2048", 256, 256, 256, F::classical, {}});
  r.add({schemes::frodo640_aes, "Frodo-640-AES", 9616, 19888, 9720, F::lattice, {"frodo-aes"}});
  r.add({schemes::frodo640_shake, "Frodo-640-SHAKE", 9616, 19888, 9720, F::lattice,
         {"frodo-shake"}});
  r.add({schemes::kyber512, "Kyber512", 800, 1632, 736, F::lattice, {"kyber"}});
  r.add({schemes::newhope512_cca, "NewHope-512-CCA", 928, 1888, 1120, F::lattice,
         {"newhope", "newhope512"}});
  r.add({schemes::ntru_hps2048509, "NTRU-HPS-2048-509", 699, 935, 699, F::lattice, {"ntru"}});
  r.add({schemes::sike_p503, "Sike-p503", 378, 434, 402, F::isogeny, {"sike", "sike503"}});
  return r;
}

void SchemeRegistry::add(SchemeProfile profile, std::shared_ptr<const KemBackend> backend) {
  if (profile.name.empty()) throw Error(Errc::invalid_argument, "scheme name is empty");
  if (profile.public_key_size == 0 || profile.private_key_size == 0 ||
      profile.ciphertext_size == 0) {
    throw Error(Errc::invalid_argument, profile.name + ": sizes must be positive");
  }
  if (profile.ciphertext_size > 0xffff) {
    throw Error(Errc::invalid_argument, profile.name + ": ciphertext exceeds 65535 bytes");
  }
  if (!backend) {
    if (profile.public_key_size < crypto::kDigestSize ||
        profile.private_key_size < ProfileKem::kSeedSize ||
        profile.ciphertext_size < ProfileKem::kMinCiphertextSize) {
      throw Error(Errc::invalid_argument, profile.name + ": sizes too small for a profile KEM");
    }
    backend = shared_profile_kem();
  }
  if (find(profile.id) != nullptr) {
    throw Error(Errc::invalid_argument, "duplicate scheme id " + std::to_string(profile.id.value));
  }
  std::vector<std::string> spellings{profile.name};
  spellings.insert(spellings.end(), profile.aliases.begin(), profile.aliases.end());
  for (const auto& s : spellings) {
    const auto key = normalize(s);
    for (const auto& existing : profiles_) {
      if (normalize(existing.name) == key ||
          std::any_of(existing.aliases.begin(), existing.aliases.end(),
                      [&](const std::string& a) { return normalize(a) == key; })) {
        throw Error(Errc::invalid_argument, "duplicate scheme name " + s);
      }
    }
  }
  profiles_.push_back(std::move(profile));
  backends_.push_back(std::move(backend));
}

void SchemeRegistry::load_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string name, family;
    unsigned id = 0;
    std::size_t pk = 0, sk = 0, ct = 0;
    std::string extra;
    if (!(fields >> name >> id >> pk >> sk >> ct >> family) || (fields >> extra) || id == 0 ||
        id > 255) {
      throw Error(Errc::malformed, "scheme config line " + std::to_string(line_no) +
                                       ": expected `name id pk sk ct family`");
    }
    SchemeFamily fam;
    if (family == "classical") {
      fam = SchemeFamily::classical;
    } else if (family == "lattice") {
      fam = SchemeFamily::lattice;
    } else if (family == "isogeny") {
      fam = SchemeFamily::isogeny;
    } else {
      throw Error(Errc::malformed, "scheme config line " + std::to_string(line_no) +
                                       ": unknown family " + family);
    }
    add({SchemeId{static_cast<std::uint8_t>(id)}, name, pk, sk, ct, fam, {}});
  }
}

const SchemeProfile* SchemeRegistry::find(SchemeId id) const noexcept {
  for (const auto& p : profiles_) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const SchemeProfile& SchemeRegistry::profile(SchemeId id) const {
  if (const auto* p = find(id)) return *p;
  throw Error(Errc::unknown_scheme, "unknown scheme id " + std::to_string(id.value));
}

const SchemeProfile& SchemeRegistry::lookup(std::string_view name) const {
  const auto key = normalize(name);
  for (const auto& p : profiles_) {
    if (normalize(p.name) == key) return p;
    for (const auto& a : p.aliases) {
      if (normalize(a) == key) return p;
    }
  }
  throw Error(Errc::unknown_scheme, "unknown scheme " + std::string(name));
}

const KemBackend& SchemeRegistry::backend(SchemeId id) const {
  for (std::size_t i = 0; i < profiles_.size(); ++i) {
    if (profiles_[i].id == id) return *backends_[i];
  }
  throw Error(Errc::unknown_scheme, "unknown scheme id " + std::to_string(id.value));
}

// ---------------------------------------------------------------------------
// Free functions

KemKeyPair keygen(const SchemeRegistry& registry, SchemeId scheme, Rng& rng) {
  return registry.backend(scheme).keygen(registry.profile(scheme), rng);
}

Encapsulation encapsulate(const SchemeRegistry& registry, const PublicKey& pk, Rng& rng) {
  return registry.backend(pk.scheme).encapsulate(registry.profile(pk.scheme), pk, rng);
}

SharedSecret decapsulate(const SchemeRegistry& registry, const PrivateKey& sk,
                         const KemCiphertext& ct) {
  return registry.backend(sk.scheme).decapsulate(registry.profile(sk.scheme), sk, ct);
}

SharedSecret hybrid_combine(const SharedSecret& k1, const SharedSecret& k2) noexcept {
  SharedSecret::Array out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k1.bytes()[i] ^ k2.bytes()[i];
  return SharedSecret(out);
}

void validate_hybrid(const SchemeRegistry& registry, const HybridScheme& hybrid) {
  const auto& c = registry.profile(hybrid.classical);
  const auto& pq = registry.profile(hybrid.post_quantum);
  if (c.family != SchemeFamily::classical) {
    throw Error(Errc::invalid_argument, c.name + " is not a classical scheme");
  }
  if (pq.family == SchemeFamily::classical) {
    throw Error(Errc::invalid_argument, pq.name + " is not a post-quantum scheme");
  }
}

HybridEncapsulation hybrid_encapsulate(const SchemeRegistry& registry, const HybridScheme& hybrid,
                                       const PublicKey& pk_classical, const PublicKey& pk_pq,
                                       Rng& rng) {
  validate_hybrid(registry, hybrid);
  if (pk_classical.scheme != hybrid.classical || pk_pq.scheme != hybrid.post_quantum) {
    throw Error(Errc::invalid_argument, "public keys do not match the hybrid scheme");
  }
  auto first = encapsulate(registry, pk_classical, rng);
  auto second = encapsulate(registry, pk_pq, rng);
  const auto secret = hybrid_combine(first.secret, second.secret);
  return {std::move(first.ciphertext), std::move(second.ciphertext), secret};
}

SharedSecret hybrid_decapsulate(const SchemeRegistry& registry, const PrivateKey& sk_classical,
                                const PrivateKey& sk_pq, const KemCiphertext& ct_classical,
                                const KemCiphertext& ct_pq) {
  validate_hybrid(registry, {sk_classical.scheme, sk_pq.scheme});
  return hybrid_combine(decapsulate(registry, sk_classical, ct_classical),
                        decapsulate(registry, sk_pq, ct_pq));
}

PublicKey import_public_key(const SchemeRegistry& registry, SchemeId scheme, ByteView bytes) {
  const auto& p = registry.profile(scheme);
  require_length(p, bytes.size(), p.public_key_size, "public key");
  return {scheme, Bytes(bytes.begin(), bytes.end())};
}

PrivateKey import_private_key(const SchemeRegistry& registry, SchemeId scheme, ByteView bytes) {
  const auto& p = registry.profile(scheme);
  require_length(p, bytes.size(), p.private_key_size, "private key");
  return {scheme, Bytes(bytes.begin(), bytes.end())};
}

}  // namespace qsor

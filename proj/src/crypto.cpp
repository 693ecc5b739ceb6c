#include "pushsim/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

#include "rsa1024.hpp"

namespace pushsim::crypto {

namespace {

constexpr std::size_t kEdSecretSize = crypto_sign_SECRETKEYBYTES;  // 64
constexpr std::size_t kEdPublicSize = crypto_sign_PUBLICKEYBYTES;  // 32
constexpr std::size_t kXSize = crypto_box_PUBLICKEYBYTES;          // 32
constexpr std::size_t kWrappedDataKey = kAeadKeySize + crypto_aead_xchacha20poly1305_ietf_ABYTES;

static_assert(randombytes_SEEDBYTES == 32);
static_assert(crypto_aead_xchacha20poly1305_ietf_NPUBBYTES == kAeadNonceSize);
static_assert(crypto_box_SEEDBYTES == 32 && crypto_sign_SEEDBYTES == 32);

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

Seed derive_seed(std::string_view label, ByteView a, ByteView b = {}) {
  Writer w;
  w.str(label).bytes(a).bytes(b);
  return hash(w.data()).bytes();
}

Bytes digest_bytes(const Digest& d) { return Bytes(d.bytes().begin(), d.bytes().end()); }

struct EdXPublic {
  ByteView ed;
  ByteView x;
};

EdXPublic split_public(const PublicKey& key) {
  if (key.scheme != KeyScheme::Ed25519X25519 || key.material.size() != kEdPublicSize + kXSize) {
    throw CryptoError(CryptoErrc::MalformedKey, "ed25519-x25519: bad public key");
  }
  ByteView m = key.material;
  return {m.first(kEdPublicSize), m.subspan(kEdPublicSize)};
}

struct EdXPrivate {
  ByteView ed;
  ByteView x;
};

EdXPrivate split_private(const PrivateKey& key) {
  if (key.scheme != KeyScheme::Ed25519X25519 || key.material.size() != kEdSecretSize + kXSize) {
    throw CryptoError(CryptoErrc::MalformedKey, "ed25519-x25519: bad private key");
  }
  ByteView m = key.material;
  return {m.first(kEdSecretSize), m.subspan(kEdSecretSize)};
}

Bytes wrap_key_derivation(ByteView shared, ByteView encapsulation, ByteView recipient) {
  Writer w;
  w.str("pushsim.hybrid.kek").bytes(shared).bytes(encapsulation).bytes(recipient);
  return digest_bytes(hash(w.data()));
}

const Bytes kZeroNonce(kAeadNonceSize, 0);

}  // namespace

std::string_view to_string(CryptoErrc code) {
  switch (code) {
    case CryptoErrc::MalformedKey: return "MalformedKey";
    case CryptoErrc::AuthFailure: return "AuthFailure";
    case CryptoErrc::Parse: return "Parse";
  }
  return "?";
}

Digest Digest::from_bytes(ByteView bytes) {
  if (bytes.size() != kSize) throw CryptoError(CryptoErrc::Parse, "digest must be 32 bytes");
  std::array<std::uint8_t, kSize> out{};
  std::copy(bytes.begin(), bytes.end(), out.begin());
  return Digest(out);
}

Digest Digest::from_hex(std::string_view text) {
  try {
    return from_bytes(pushsim::from_hex(text));
  } catch (const CodecError& e) {
    throw CryptoError(CryptoErrc::Parse, e.what());
  }
}

bool Digest::is_zero() const {
  return std::all_of(bytes_.begin(), bytes_.end(), [](auto b) { return b == 0; });
}

Digest hash(ByteView data) {
  ensure_sodium();
  std::array<std::uint8_t, Digest::kSize> out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return Digest(out);
}

Digest hash_pair(ByteView a, ByteView b) {
  ensure_sodium();
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, a.data(), a.size());
  crypto_hash_sha256_update(&st, b.data(), b.size());
  std::array<std::uint8_t, Digest::kSize> out{};
  crypto_hash_sha256_final(&st, out.data());
  return Digest(out);
}

Rng::Rng(std::uint64_t seed) {
  Writer w;
  w.str("pushsim.rng.root").u64(seed);
  seed_ = hash(w.data()).bytes();
}

Bytes Rng::bytes(std::size_t n) {
  ensure_sodium();
  Writer w;
  w.str("pushsim.rng.draw").raw(seed_).u64(counter_++);
  auto draw_seed = hash(w.data());
  Bytes out(n);
  randombytes_buf_deterministic(out.data(), out.size(), draw_seed.bytes().data());
  return out;
}

Seed Rng::seed32() {
  auto b = bytes(32);
  Seed out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

std::uint64_t Rng::next_u64() {
  Reader r(bytes(8));
  return r.u64();
}

Rng Rng::fork(std::string_view label) const {
  return Rng(derive_seed("pushsim.rng.fork", seed_, view(label)));
}

std::string_view to_string(KeyScheme scheme) {
  switch (scheme) {
    case KeyScheme::Ed25519X25519: return "ed25519-x25519";
    case KeyScheme::Rsa1024: return "rsa-1024";
  }
  return "?";
}

KeyScheme parse_key_scheme(std::string_view name) {
  if (name == "ed25519-x25519") return KeyScheme::Ed25519X25519;
  if (name == "rsa-1024") return KeyScheme::Rsa1024;
  throw std::invalid_argument("unknown key scheme: " + std::string(name));
}

std::string_view to_string(KeyRole role) {
  switch (role) {
    case KeyRole::Endorsement: return "EK";
    case KeyRole::AttestationIdentity: return "AIK";
    case KeyRole::Binding: return "BINDING";
    case KeyRole::Session: return "SESSION";
    case KeyRole::Storage: return "STORAGE";
    case KeyRole::Authority: return "AUTHORITY";
  }
  return "?";
}

KeyRole parse_key_role(std::string_view name) {
  for (auto role : {KeyRole::Endorsement, KeyRole::AttestationIdentity, KeyRole::Binding,
                    KeyRole::Session, KeyRole::Storage, KeyRole::Authority}) {
    if (to_string(role) == name) return role;
  }
  throw std::invalid_argument("unknown key role: " + std::string(name));
}

Bytes PublicKey::encode() const {
  return Writer().u8(static_cast<std::uint8_t>(scheme)).bytes(material).take();
}

namespace {

KeyScheme scheme_from_byte(std::uint8_t b) {
  if (b == static_cast<std::uint8_t>(KeyScheme::Ed25519X25519)) return KeyScheme::Ed25519X25519;
  if (b == static_cast<std::uint8_t>(KeyScheme::Rsa1024)) return KeyScheme::Rsa1024;
  throw CryptoError(CryptoErrc::Parse, "unknown key scheme tag");
}

}  // namespace

PublicKey PublicKey::decode(ByteView data) {
  try {
    Reader r(data);
    PublicKey out;
    out.scheme = scheme_from_byte(r.u8());
    out.material = r.bytes();
    r.expect_end();
    return out;
  } catch (const CodecError& e) {
    throw CryptoError(CryptoErrc::Parse, e.what());
  }
}

Bytes PrivateKey::encode() const {
  return Writer().u8(static_cast<std::uint8_t>(scheme)).bytes(material).take();
}

PrivateKey PrivateKey::decode(ByteView data) {
  try {
    Reader r(data);
    PrivateKey out;
    out.scheme = scheme_from_byte(r.u8());
    out.material = r.bytes();
    r.expect_end();
    return out;
  } catch (const CodecError& e) {
    throw CryptoError(CryptoErrc::Parse, e.what());
  }
}

KeyPair keygen(const Seed& seed, KeyRole role, KeyScheme scheme) {
  ensure_sodium();
  const std::uint8_t role_tag[] = {static_cast<std::uint8_t>(role),
                                   static_cast<std::uint8_t>(scheme)};
  KeyPair out;
  out.public_key.scheme = scheme;
  out.private_key.scheme = scheme;

  if (scheme == KeyScheme::Rsa1024) {
    auto material = rsa::generate(derive_seed("pushsim.keygen.rsa", role_tag, seed));
    out.public_key.material = std::move(material.public_material);
    out.private_key.material = std::move(material.private_material);
  } else {
    auto sign_seed = derive_seed("pushsim.keygen.sign", role_tag, seed);
    auto box_seed = derive_seed("pushsim.keygen.box", role_tag, seed);
    std::array<std::uint8_t, kEdPublicSize> ed_pk{};
    std::array<std::uint8_t, kEdSecretSize> ed_sk{};
    std::array<std::uint8_t, kXSize> x_pk{};
    std::array<std::uint8_t, kXSize> x_sk{};
    crypto_sign_seed_keypair(ed_pk.data(), ed_sk.data(), sign_seed.data());
    crypto_box_seed_keypair(x_pk.data(), x_sk.data(), box_seed.data());
    out.public_key.material = Writer().raw(ed_pk).raw(x_pk).take();
    out.private_key.material = Writer().raw(ed_sk).raw(x_sk).take();
    sodium_memzero(ed_sk.data(), ed_sk.size());
    sodium_memzero(x_sk.data(), x_sk.size());
  }
  out.key_id = out.public_key.id();
  return out;
}

Bytes sign(const PrivateKey& key, ByteView msg) {
  ensure_sodium();
  if (key.scheme == KeyScheme::Rsa1024) return rsa::sign(key.material, msg);
  auto parts = split_private(key);
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), parts.ed.data());
  return sig;
}

bool verify(const PublicKey& key, ByteView msg, ByteView signature) {
  ensure_sodium();
  if (key.scheme == KeyScheme::Rsa1024) return rsa::verify(key.material, msg, signature);
  auto parts = split_public(key);
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), msg.data(), msg.size(),
                                     parts.ed.data()) == 0;
}

Bytes HybridCiphertext::encode() const {
  return Writer().bytes(wrapped_key).bytes(nonce).bytes(body).take();
}

HybridCiphertext HybridCiphertext::decode(ByteView data) {
  try {
    Reader r(data);
    HybridCiphertext out;
    out.wrapped_key = r.bytes();
    out.nonce = r.bytes();
    out.body = r.bytes();
    r.expect_end();
    return out;
  } catch (const CodecError& e) {
    throw CryptoError(CryptoErrc::Parse, std::string("hybrid ciphertext: ") + e.what());
  }
}

Bytes aead_seal(ByteView key, ByteView nonce, ByteView plaintext, ByteView ad) {
  ensure_sodium();
  if (key.size() != kAeadKeySize || nonce.size() != kAeadNonceSize) {
    throw CryptoError(CryptoErrc::MalformedKey, "aead: bad key or nonce size");
  }
  Bytes out(plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(),
                                             plaintext.size(), ad.data(), ad.size(), nullptr,
                                             nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

Bytes aead_open(ByteView key, ByteView nonce, ByteView ciphertext, ByteView ad) {
  ensure_sodium();
  if (key.size() != kAeadKeySize) throw CryptoError(CryptoErrc::MalformedKey, "aead: bad key size");
  if (nonce.size() != kAeadNonceSize || ciphertext.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES) {
    throw CryptoError(CryptoErrc::Parse, "aead: truncated input");
  }
  Bytes out(ciphertext.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long out_len = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, ciphertext.data(),
                                                 ciphertext.size(), ad.data(), ad.size(),
                                                 nonce.data(), key.data()) != 0) {
    throw CryptoError(CryptoErrc::AuthFailure, "aead: authentication failed");
  }
  out.resize(out_len);
  return out;
}

Bytes passphrase_key(std::string_view passphrase, ByteView salt) {
  ensure_sodium();
  static_assert(crypto_pwhash_SALTBYTES == kPassphraseSaltSize);
  if (salt.size() != kPassphraseSaltSize) throw CryptoError(CryptoErrc::Parse, "bad salt size");
  Bytes key(kAeadKeySize);
  if (crypto_pwhash(key.data(), key.size(), passphrase.data(), passphrase.size(), salt.data(),
                    crypto_pwhash_OPSLIMIT_MIN, crypto_pwhash_MEMLIMIT_MIN,
                    crypto_pwhash_ALG_ARGON2ID13) != 0) {
    throw std::runtime_error("passphrase key derivation failed");
  }
  return key;
}

HybridCiphertext hybrid_encrypt(const PublicKey& recipient, ByteView plaintext, Rng& rng) {
  ensure_sodium();
  Bytes encapsulation;
  Bytes kek;
  if (recipient.scheme == KeyScheme::Rsa1024) {
    auto enc = rsa::encapsulate(recipient.material, rng);
    kek = wrap_key_derivation(enc.secret, enc.encapsulated, recipient.material);
    encapsulation = std::move(enc.encapsulated);
  } else {
    auto parts = split_public(recipient);
    auto eph_seed = rng.seed32();
    std::array<std::uint8_t, kXSize> eph_pk{};
    std::array<std::uint8_t, kXSize> eph_sk{};
    crypto_box_seed_keypair(eph_pk.data(), eph_sk.data(), eph_seed.data());
    std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
    if (crypto_scalarmult(shared.data(), eph_sk.data(), parts.x.data()) != 0) {
      throw CryptoError(CryptoErrc::MalformedKey, "x25519: degenerate recipient key");
    }
    encapsulation.assign(eph_pk.begin(), eph_pk.end());
    kek = wrap_key_derivation(shared, encapsulation, parts.x);
    sodium_memzero(eph_sk.data(), eph_sk.size());
    sodium_memzero(shared.data(), shared.size());
  }

  auto data_key = rng.bytes(kAeadKeySize);
  HybridCiphertext out;
  out.wrapped_key = encapsulation;
  auto wrapped = aead_seal(kek, kZeroNonce, data_key);
  out.wrapped_key.insert(out.wrapped_key.end(), wrapped.begin(), wrapped.end());
  out.nonce = rng.bytes(kAeadNonceSize);
  out.body = aead_seal(data_key, out.nonce, plaintext, out.wrapped_key);
  return out;
}

Bytes hybrid_decrypt(const PrivateKey& key, const HybridCiphertext& ct) {
  ensure_sodium();
  std::size_t enc_size =
      key.scheme == KeyScheme::Rsa1024 ? rsa::kModulusBytes : kXSize;
  if (ct.wrapped_key.size() != enc_size + kWrappedDataKey || ct.nonce.size() != kAeadNonceSize) {
    throw CryptoError(CryptoErrc::Parse, "hybrid ciphertext: bad field sizes");
  }
  ByteView wrapped = ct.wrapped_key;
  auto encapsulation = wrapped.first(enc_size);
  auto wrapped_data_key = wrapped.subspan(enc_size);

  Bytes kek;
  if (key.scheme == KeyScheme::Rsa1024) {
    auto secret = rsa::decapsulate(key.material, encapsulation);
    Reader r(key.material);
    auto n = r.bytes();
    auto e = Bytes{0x01, 0x00, 0x01};
    Bytes public_material = Writer().bytes(n).bytes(e).take();
    kek = wrap_key_derivation(secret, encapsulation, public_material);
  } else {
    auto parts = split_private(key);
    std::array<std::uint8_t, kXSize> own_pk{};
    crypto_scalarmult_base(own_pk.data(), parts.x.data());
    std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
    if (crypto_scalarmult(shared.data(), parts.x.data(), encapsulation.data()) != 0) {
      throw CryptoError(CryptoErrc::AuthFailure, "x25519: degenerate encapsulation");
    }
    kek = wrap_key_derivation(shared, encapsulation, own_pk);
    sodium_memzero(shared.data(), shared.size());
  }
  auto data_key = aead_open(kek, kZeroNonce, wrapped_data_key);
  return aead_open(data_key, ct.nonce, ct.body, ct.wrapped_key);
}

}  // namespace pushsim::crypto

// Deterministic cryptographic primitives: SHA-256 digests, a seedable byte
// generator, signature/key-encapsulation key pairs and a hybrid envelope.
//
// Two asymmetric schemes sit behind the same KeyPair surface:
//   Ed25519X25519  Ed25519 signatures, X25519 key wrapping (default)
//   Rsa1024        1024-bit RSA, full-domain-hash signatures, RSA-KEM wrapping
// Every function is a pure function of its inputs plus an explicit Rng.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pushsim/bytes.hpp"

namespace pushsim::crypto {

enum class CryptoErrc { MalformedKey, AuthFailure, Parse };

std::string_view to_string(CryptoErrc code);

class CryptoError : public std::runtime_error {
 public:
  CryptoError(CryptoErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CryptoErrc code() const { return code_; }

 private:
  CryptoErrc code_;
};

class Digest {
 public:
  static constexpr std::size_t kSize = 32;

  Digest() = default;  // all-zero
  explicit Digest(const std::array<std::uint8_t, kSize>& bytes) : bytes_(bytes) {}
  /// Throws CryptoError(Parse) unless `bytes` is exactly 32 bytes.
  static Digest from_bytes(ByteView bytes);
  static Digest from_hex(std::string_view text);

  const std::array<std::uint8_t, kSize>& bytes() const { return bytes_; }
  ByteView view() const { return bytes_; }
  std::string hex() const { return to_hex(bytes_); }
  bool is_zero() const;

  auto operator<=>(const Digest&) const = default;

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

Digest hash(ByteView data);
inline Digest hash(std::string_view text) { return hash(view(text)); }
/// hash(a || b) without materializing the concatenation.
Digest hash_pair(ByteView a, ByteView b);

using Seed = std::array<std::uint8_t, 32>;

/// Seeded deterministic byte stream. Each draw is keyed by (seed, counter),
/// so two generators with equal seeds produce identical sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  explicit Rng(const Seed& seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  Bytes bytes(std::size_t n);
  Seed seed32();
  std::uint64_t next_u64();
  /// Independent child stream; does not advance this generator.
  Rng fork(std::string_view label) const;

  const Seed& seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Seed seed_;
  std::uint64_t counter_ = 0;
};

enum class KeyScheme : std::uint8_t { Ed25519X25519 = 1, Rsa1024 = 2 };

std::string_view to_string(KeyScheme scheme);
/// "ed25519-x25519" or "rsa-1024"; throws std::invalid_argument otherwise.
KeyScheme parse_key_scheme(std::string_view name);

enum class KeyRole : std::uint8_t {
  Endorsement = 1,
  AttestationIdentity = 2,
  Binding = 3,
  Session = 4,
  Storage = 5,
  Authority = 6,
};

std::string_view to_string(KeyRole role);
KeyRole parse_key_role(std::string_view name);

struct PublicKey {
  KeyScheme scheme = KeyScheme::Ed25519X25519;
  Bytes material;

  /// scheme byte followed by the length-prefixed material.
  Bytes encode() const;
  static PublicKey decode(ByteView data);
  Digest id() const { return hash(encode()); }

  bool operator==(const PublicKey&) const = default;
};

struct PrivateKey {
  KeyScheme scheme = KeyScheme::Ed25519X25519;
  Bytes material;

  Bytes encode() const;
  static PrivateKey decode(ByteView data);
};

struct KeyPair {
  PublicKey public_key;
  PrivateKey private_key;
  Digest key_id;  // hash(public_key.encode())
};

/// Deterministic in (seed, role, scheme); distinct roles give distinct keys.
KeyPair keygen(const Seed& seed, KeyRole role,
               KeyScheme scheme = KeyScheme::Ed25519X25519);

/// Throws CryptoError(MalformedKey) if the key cannot be used.
Bytes sign(const PrivateKey& key, ByteView msg);
/// False on a bad signature; throws CryptoError(MalformedKey) for a key that
/// does not parse.
bool verify(const PublicKey& key, ByteView msg, ByteView signature);

struct HybridCiphertext {
  Bytes wrapped_key;  // key encapsulation || wrapped data key
  Bytes nonce;
  Bytes body;         // AEAD ciphertext, wrapped_key as associated data

  Bytes encode() const;
  /// Throws CryptoError(Parse) on truncated or trailing input.
  static HybridCiphertext decode(ByteView data);

  bool operator==(const HybridCiphertext&) const = default;
};

HybridCiphertext hybrid_encrypt(const PublicKey& recipient, ByteView plaintext, Rng& rng);
/// Throws CryptoError(AuthFailure) for a wrong key or modified ciphertext and
/// CryptoError(Parse) for structurally invalid input.
Bytes hybrid_decrypt(const PrivateKey& key, const HybridCiphertext& ct);

// Symmetric AEAD used by secure channels and the key store.
inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 24;
Bytes aead_seal(ByteView key, ByteView nonce, ByteView plaintext, ByteView ad = {});
Bytes aead_open(ByteView key, ByteView nonce, ByteView ciphertext, ByteView ad = {});

inline constexpr std::size_t kPassphraseSaltSize = 16;
/// Argon2id at its minimum cost parameters; a desk-scale store key, not a
/// hardened password hash.
Bytes passphrase_key(std::string_view passphrase, ByteView salt);

}  // namespace pushsim::crypto

// Software model of a TPM bound to one platform.
//
// The model keeps 24 SHA-256 PCRs, a measurement log, a manufacturer-certified
// endorsement key, owner authorisation, and owned keys (AIKs, binding keys and
// the storage key that protects sealed blobs). Private key halves never leave
// the Tpm object except encrypted inside the key store document.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushsim/crypto.hpp"

namespace pushsim::tpm {

using crypto::Digest;

inline constexpr std::uint32_t kPcrCount = 24;
inline constexpr std::size_t kNonceSize = 20;

using Nonce = std::array<std::uint8_t, kNonceSize>;
using PcrSelection = std::vector<std::uint32_t>;  // ascending, unique

enum class TpmErrc {
  AlreadyOwned,
  NotOwned,
  AuthFail,
  BadIndex,
  BadPolicy,
  NoSuchKey,
  WrongRole,
  WrongTpm,
  PcrMismatch,
  DecryptFailed,
};

std::string_view to_string(TpmErrc code);

class TpmError : public std::runtime_error {
 public:
  TpmError(TpmErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  TpmErrc code() const { return code_; }

 private:
  TpmErrc code_;
};

class PcrBank {
 public:
  /// Throws TpmError(BadIndex).
  const Digest& read(std::uint32_t index) const;
  /// registers[index] := hash(old || value).
  Digest extend(std::uint32_t index, const Digest& value);

  const std::array<Digest, kPcrCount>& registers() const { return registers_; }
  bool operator==(const PcrBank&) const = default;

 private:
  friend class TpmPersistence;

  std::array<Digest, kPcrCount> registers_{};
};

struct MeasurementEvent {
  std::uint32_t pcr_index = 0;
  std::string component_name;
  Digest code_digest;
  std::uint64_t sequence_no = 0;

  bool operator==(const MeasurementEvent&) const = default;
};

struct MeasurementLog {
  std::vector<MeasurementEvent> events;

  Bytes encode() const;
  static MeasurementLog decode(ByteView data);
  bool operator==(const MeasurementLog&) const = default;
};

/// Replays a log over a reset bank. Throws TpmError(BadIndex) for an event
/// outside 0..23.
PcrBank replay(const MeasurementLog& log);

/// hash(concatenation of the selected registers in ascending index order).
Digest composite(const PcrBank& bank, const PcrSelection& selection);

struct PcrPolicy {
  std::map<std::uint32_t, Digest> required_values;

  PcrSelection selection() const;
  /// Composite over required_values, comparable with a quote's composite.
  Digest composite() const;
  bool well_formed() const;
  bool satisfied_by(const PcrBank& bank) const;

  Bytes encode() const;
  static PcrPolicy decode(ByteView data);
  bool operator==(const PcrPolicy&) const = default;
};

/// Normalises a selection and throws TpmError(BadPolicy) if empty or out of range.
PcrSelection make_selection(std::vector<std::uint32_t> indices);

struct EndorsementCredential {
  crypto::PublicKey ek_public;
  Bytes signature;  // manufacturer root over ek_public.encode()

  Digest tpm_id() const { return ek_public.id(); }
  Bytes encode() const;
  static EndorsementCredential decode(ByteView data);
};

struct SealedBlob {
  Digest tpm_id;
  PcrPolicy policy;
  crypto::HybridCiphertext ciphertext;
  Digest auth_digest;

  Bytes encode() const;
  static SealedBlob decode(ByteView data);
};

struct Quote {
  Digest aik_id;
  Nonce nonce{};
  PcrSelection selection;
  Digest composite;
  Bytes signature;

  /// The byte string the AIK signs: (nonce, selection, composite).
  Bytes signed_payload() const;
  Bytes encode() const;
  static Quote decode(ByteView data);
};

bool verify_quote(const crypto::PublicKey& aik_public, const Quote& quote);

struct CreatedKey {
  crypto::PublicKey public_key;
  Digest key_id;
};

struct KeySlot {
  crypto::KeyPair pair;
  crypto::KeyRole role;
  std::optional<PcrPolicy> policy;  // always set for Binding keys
};

class Tpm {
 public:
  /// Fresh bank, empty log, no owner; EK derived from `seed` and certified by
  /// the manufacturer root.
  static Tpm manufacture(const crypto::Seed& seed, const crypto::PrivateKey& manufacturer_root,
                         crypto::KeyScheme scheme = crypto::KeyScheme::Ed25519X25519);

  const Digest& id() const { return id_; }
  const EndorsementCredential& ekc() const { return ekc_; }
  const PcrBank& pcrs() const { return pcrs_; }
  const MeasurementLog& log() const { return log_; }
  bool owned() const { return owner_auth_.has_value(); }
  crypto::KeyScheme scheme() const { return scheme_; }
  const std::optional<std::string>& engine_label() const { return engine_label_; }
  void set_engine_label(std::optional<std::string> label) { engine_label_ = std::move(label); }

  /// Throws AlreadyOwned. Creates the storage key used for sealing.
  void take_ownership(ByteView auth_secret);

  /// Raw register update; does not touch the log.
  Digest extend(std::uint32_t index, const Digest& value);
  /// Logs hash(code) and extends the register with it.
  MeasurementEvent measure(std::uint32_t index, std::string component_name, ByteView code);

  CreatedKey create_aik(ByteView auth);
  CreatedKey create_binding_key(ByteView auth, const PcrPolicy& policy);
  /// Public half of an owned key; throws NoSuchKey.
  const crypto::PublicKey& public_key(const Digest& key_id) const;
  std::vector<CreatedKey> keys(crypto::KeyRole role) const;

  Quote quote(const Digest& aik_id, const Nonce& nonce, const PcrSelection& selection) const;

  SealedBlob seal(ByteView auth, ByteView data, const PcrSelection& selection);
  /// Checks in fixed order: WrongTpm, AuthFail, PcrMismatch.
  Bytes unseal(ByteView auth, const SealedBlob& blob) const;
  /// Checks NoSuchKey, WrongRole, AuthFail, PcrMismatch, then decrypts.
  Bytes bound_decrypt(ByteView auth, const Digest& binding_key_id,
                      const crypto::HybridCiphertext& ct) const;

 private:
  friend class TpmPersistence;

  Tpm() = default;
  void check_auth(ByteView auth) const;
  const KeySlot& slot(const Digest& key_id) const;
  CreatedKey add_key(crypto::KeyRole role, std::optional<PcrPolicy> policy);

  crypto::KeyScheme scheme_ = crypto::KeyScheme::Ed25519X25519;
  crypto::KeyPair ek_;
  EndorsementCredential ekc_;
  Digest id_;
  PcrBank pcrs_;
  MeasurementLog log_;
  std::optional<Digest> owner_auth_;
  std::optional<Digest> storage_key_id_;
  std::map<Digest, KeySlot> keys_;
  std::optional<std::string> engine_label_;
  crypto::Rng rng_{crypto::Seed{}};
};

}  // namespace pushsim::tpm

// Actors and the two trusted push protocols.
//
// Scenario 1 (per-push attestation, sealed storage):
//   2 secure channel  3 remote attestation  4 optional key exchange
//   5 data transfer, sealed on receipt
// Scenario 2 (binding key certified by the privacy CA):
//   1 binding key + credentials to PCA  2 online attestation  3 certificate
//   4 registration at the server  (once per device)
//   6 server encrypts to the binding key; device decrypts only in the
//     certified state
// Step 1 of both flows (source notifies server) is notify()/poll().
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushsim/crypto.hpp"
#include "pushsim/netsim.hpp"
#include "pushsim/privacy_ca.hpp"
#include "pushsim/tpm.hpp"

namespace pushsim::protocol {

using crypto::Digest;

inline constexpr std::uint32_t kAppPcr = 10;
inline const std::string kEmailApp = "email-app";

enum class ProtocolErrc {
  NothingPending,
  UnregisteredUser,
  RegistrationRefused,
  MissingAik,
  BadMessage,
};

std::string_view to_string(ProtocolErrc code);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ProtocolErrc code() const { return code_; }

 private:
  ProtocolErrc code_;
};

// ---------------------------------------------------------------------------
// Verifier

struct ReferenceMeasurementDb {
  std::map<std::string, std::set<Digest>> entries;
  std::vector<std::string> required_components;

  void allow(const std::string& component, const Digest& code_digest);
  bool allows(const tpm::MeasurementEvent& event) const;
  /// required_components is a subset of the entry names.
  bool well_formed() const;
};

enum class UntrustedReason {
  MalformedEvidence,
  BadCredential,
  BadQuoteSignature,
  StaleNonce,
  SelectionMismatch,
  LogReplayMismatch,
  LogOrderViolation,
  UnknownMeasurement,
  MissingComponent,
};

std::string_view to_string(UntrustedReason reason);

struct Verdict {
  bool trusted = false;
  UntrustedReason reason = UntrustedReason::MalformedEvidence;
  std::string detail;

  static Verdict Trusted() { return {true, UntrustedReason::MalformedEvidence, {}}; }
  static Verdict Untrusted(UntrustedReason r, std::string detail = {}) {
    return {false, r, std::move(detail)};
  }
  std::string str() const;
};

struct AttestationEvidence {
  tpm::Quote quote;
  tpm::MeasurementLog log;
  pca::AikCredential credential;

  Bytes encode() const;
  static AttestationEvidence decode(ByteView data);
};

/// Credential, quote signature, nonce, selection, log replay against the
/// quoted composite, log ordering, whitelist, required components; the first
/// failing check decides the reason.
Verdict verify_evidence(const AttestationEvidence& evidence, const tpm::Nonce& expected_nonce,
                        const tpm::PcrSelection& selection, const crypto::PublicKey& pca_public,
                        const ReferenceMeasurementDb& db);

// ---------------------------------------------------------------------------
// Actors

struct PendingItem {
  std::string user_id;
  Bytes payload;

  bool operator==(const PendingItem&) const = default;
};

class DataSource {
 public:
  explicit DataSource(net::ActorId id) : id_(std::move(id)) {}
  const net::ActorId& id() const { return id_; }
  /// Pull mode: new content waits here until the server polls.
  void offer(std::string user_id, Bytes payload);
  std::deque<PendingItem>& outbox() { return outbox_; }

 private:
  net::ActorId id_;
  std::deque<PendingItem> outbox_;
};

struct Registration {
  pca::BindingKeyCertificate certificate;
  crypto::PublicKey binding_public;
};

class SyncServerActor {
 public:
  SyncServerActor(net::ActorId id, crypto::PublicKey pca_public, ReferenceMeasurementDb db,
                  crypto::Rng rng);

  const net::ActorId& id() const { return id_; }
  const crypto::PublicKey& pca_public() const { return pca_public_; }
  const ReferenceMeasurementDb& reference_db() const { return db_; }
  const std::deque<PendingItem>& pending() const { return pending_; }
  const std::map<std::string, Registration>& registry() const { return registry_; }
  crypto::Rng& rng() { return rng_; }

  tpm::PcrSelection attest_selection;  // defaults to all PCRs

  void enqueue(PendingItem item) { pending_.push_back(std::move(item)); }
  /// Removes up to `max_items` pending items for `user_id`, FIFO.
  std::vector<PendingItem> take_pending(const std::string& user_id, std::size_t max_items);

  /// Throws RegistrationRefused unless the certificate verifies under the PCA
  /// key. Replaces an existing registration for the user.
  void register_binding(const std::string& user_id, const pca::BindingKeyCertificate& cert);

 private:
  net::ActorId id_;
  crypto::PublicKey pca_public_;
  ReferenceMeasurementDb db_;
  crypto::Rng rng_;
  std::deque<PendingItem> pending_;
  std::map<std::string, Registration> registry_;
};

struct BootComponent {
  std::uint32_t pcr = 0;
  std::string name;
  Bytes code;
};

/// bios, bootloader, kernel and the e-mail application on PCR 10.
std::vector<BootComponent> standard_boot_chain();
/// Whitelist for standard_boot_chain() requiring the e-mail application.
ReferenceMeasurementDb standard_reference_db();

struct AikMaterial {
  Digest key_id;
  pca::AikCredential credential;
};

struct BindingMaterial {
  Digest key_id;
  pca::BindingKeyCertificate certificate;
};

class DeviceActor {
 public:
  DeviceActor(net::ActorId id, std::string user_id, tpm::Tpm tpm, Bytes auth, crypto::Rng rng);

  const net::ActorId& id() const { return id_; }
  const std::string& user_id() const { return user_id_; }
  tpm::Tpm& tpm() { return tpm_; }
  const tpm::Tpm& tpm() const { return tpm_; }
  const Bytes& auth() const { return auth_; }
  crypto::Rng& rng() { return rng_; }
  bool app_measured() const { return app_measured_; }

  void boot(const std::vector<BootComponent>& chain);

  std::optional<AikMaterial> aik;
  std::deque<Digest> prefetched_aiks;
  std::optional<BindingMaterial> binding;

  // Data at rest: sealed blobs (scenario 1) and binding-key ciphertexts
  // (scenario 2). No plaintext is retained.
  std::vector<tpm::SealedBlob> sealed_inbox;
  std::vector<crypto::HybridCiphertext> bound_inbox;

 private:
  net::ActorId id_;
  std::string user_id_;
  tpm::Tpm tpm_;
  Bytes auth_;
  crypto::Rng rng_;
  bool app_measured_ = false;
};

/// Privacy CA as a network actor together with the manufacturer trust anchor.
struct Pki {
  net::ActorId id = "pca";
  pca::PrivacyCa ca;
  crypto::PublicKey manufacturer_root;
  crypto::Rng rng;
};

// ---------------------------------------------------------------------------
// Sessions

enum class Scenario { PerPushAttestation = 1, BindingKey = 2 };

enum class OutcomeKind { Delivered, DeliveredLocked, Refused, Failed };

struct Outcome {
  OutcomeKind kind = OutcomeKind::Delivered;
  std::string reason;

  /// "Delivered", "Delivered-but-Locked", "Refused(<reason>)", "Failed(<reason>)".
  std::string str() const;
  bool operator==(const Outcome&) const = default;
};

struct TranscriptStep {
  std::string step_label;  // e.g. "S1.3"
  std::string direction;   // "<from>-><to>"
  std::uint64_t seq = 0;
  std::string msg_type;
};

struct SessionTranscript {
  Scenario scenario = Scenario::PerPushAttestation;
  std::vector<TranscriptStep> steps;
  Outcome outcome;
  std::vector<Outcome> items;  // one per payload handled in the session
  std::optional<Verdict> verdict;
};

struct PushOptions {
  bool independent_encryption = true;
  bool fresh_aik = false;
  tpm::PcrSelection seal_selection{kAppPcr};
};

struct SecureChannel {
  std::uint64_t id = 0;
  net::ActorId server;
  net::ActorId device;
  Bytes key;
};

/// Push mode: the source hands new content straight to the server.
void notify(DataSource& source, SyncServerActor& server, std::string user_id, Bytes payload);
/// Pull mode: the server drains the source's outbox. Returns items moved.
std::size_t poll(DataSource& source, SyncServerActor& server);

/// Throws net::NetError(Unreachable) when no route exists.
SecureChannel establish_secure_channel(SyncServerActor& server, DeviceActor& device,
                                       net::Network& net, SessionTranscript* steps = nullptr);

Verdict attest_device(SyncServerActor& server, DeviceActor& device, net::Network& net,
                      const SecureChannel& channel, SessionTranscript* steps = nullptr);

/// Generates AIKs ahead of time; charged to the current phase.
void prefetch_aiks(DeviceActor& device, net::Network& net, std::size_t count);
/// Creates (or takes a prefetched) AIK and obtains its credential from the PCA.
void enroll_aik(DeviceActor& device, Pki& pki, net::Network& net,
                SessionTranscript* steps = nullptr);

SessionTranscript scenario1_push(SyncServerActor& server, DeviceActor& device, Pki& pki,
                                 net::Network& net, const PushOptions& options);

/// Current register values over `selection`.
tpm::PcrPolicy current_policy(const tpm::Tpm& tpm, const tpm::PcrSelection& selection);

/// Stages 1 and 2. PCA failures propagate as pca::PcaError; a certificate the
/// server rejects raises ProtocolError(RegistrationRefused).
pca::BindingKeyCertificate scenario2_provision(DeviceActor& device, Pki& pki,
                                               SyncServerActor& server, net::Network& net,
                                               const tpm::PcrPolicy& policy);

/// Stage 3. Throws ProtocolError(UnregisteredUser).
SessionTranscript scenario2_push(SyncServerActor& server, DeviceActor& device, net::Network& net);

/// Scenario 1: one channel, attestation and key exchange for all items.
/// Scenario 2: a plain loop of stage-3 sends.
SessionTranscript bulk_push(SyncServerActor& server, DeviceActor& device, Pki& pki,
                            net::Network& net, Scenario scenario, const PushOptions& options,
                            std::size_t max_items);

/// Raw extend of `pcr` outside the measurement log, recorded as local.tamper.
void tamper(DeviceActor& device, net::Network& net, std::uint32_t pcr);

struct OpenAttempt {
  Scenario scenario;
  std::size_t index = 0;
  bool ok = false;
  std::optional<tpm::TpmErrc> error;
  std::uint64_t seq = 0;  // local.open_* event
};

/// Tries to read every stored item (unseal or bound_decrypt) and records one
/// local.open_ok / local.open_pcr_mismatch / local.open_failed event each.
std::vector<OpenAttempt> open_inbox(DeviceActor& device, net::Network& net);

/// True when `msg_type` belongs to an attestation exchange.
bool is_attestation_type(std::string_view msg_type);

}  // namespace pushsim::protocol

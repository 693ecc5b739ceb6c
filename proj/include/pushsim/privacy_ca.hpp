// Privacy CA: enrols AIKs against a manufacturer-issued endorsement
// credential and certifies binding keys after an online attestation, enclosing
// the required PCR values in the certificate.
#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushsim/crypto.hpp"
#include "pushsim/tpm.hpp"

namespace pushsim::pca {

using crypto::Digest;

enum class PcaErrc { BadEkc, BadCredential, BadQuote, StaleNonce, PolicyMismatch };

std::string_view to_string(PcaErrc code);

class PcaError : public std::runtime_error {
 public:
  PcaError(PcaErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PcaErrc code() const { return code_; }

 private:
  PcaErrc code_;
};

struct AikCredential {
  crypto::PublicKey aik_public;
  Digest tpm_id;
  double issued_at = 0;
  Bytes signature;

  Bytes signed_payload() const;
  Bytes encode() const;
  static AikCredential decode(ByteView data);
};

struct BindingKeyCertificate {
  crypto::PublicKey binding_public;
  tpm::PcrPolicy policy;
  Digest aik_id;
  double issued_at = 0;
  Bytes signature;

  Bytes signed_payload() const;
  Bytes encode() const;
  static BindingKeyCertificate decode(ByteView data);
};

bool verify_aik_credential(const crypto::PublicKey& pca_public, const AikCredential& credential);
/// False on any defect: bad signature, malformed key, or empty policy.
bool verify_binding_certificate(const crypto::PublicKey& pca_public,
                                const BindingKeyCertificate& cert);

/// Issued-certificate ledger entry; `record` is the encoded credential or
/// certificate.
struct LedgerEntry {
  std::string kind;  // "aik_credential" | "binding_certificate"
  Bytes record;
};

class PrivacyCa {
 public:
  explicit PrivacyCa(crypto::KeyPair signing_key) : key_(std::move(signing_key)) {}

  const crypto::PublicKey& public_key() const { return key_.public_key; }

  /// Throws PcaError(BadEkc) unless `ekc` verifies under the manufacturer root.
  AikCredential enroll_aik(const crypto::PublicKey& aik_public,
                           const tpm::EndorsementCredential& ekc,
                           const crypto::PublicKey& manufacturer_root, double now);

  /// Fresh challenge for a binding-key attestation; single use.
  tpm::Nonce issue_nonce(crypto::Rng& rng);
  bool nonce_outstanding(const tpm::Nonce& nonce) const { return outstanding_.contains(nonce); }

  /// Checks StaleNonce, BadCredential, BadQuote, PolicyMismatch in that order.
  /// The expected nonce is consumed whatever the result.
  BindingKeyCertificate certify_binding_key(const crypto::PublicKey& binding_public,
                                            const tpm::PcrPolicy& policy,
                                            const AikCredential& aik_credential,
                                            const tpm::Quote& quote,
                                            const tpm::Nonce& expected_nonce, double now);

  const std::vector<LedgerEntry>& ledger() const { return ledger_; }

 private:
  friend class PcaPersistence;

  crypto::KeyPair key_;
  std::set<tpm::Nonce> outstanding_;
  std::vector<LedgerEntry> ledger_;
};

}  // namespace pushsim::pca

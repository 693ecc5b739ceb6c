// Key store: JSON documents holding a TPM's or the privacy CA's state, with
// every private half encrypted under a passphrase-derived key.
//
// tpm-<tpm_id>.json
//   format "pushsim-tpm/1", tpm_id, scheme, engine_label, ek_public,
//   ekc_signature, pcrs[24], log[{sequence_no, pcr_index, component_name,
//   code_digest}], storage_key_id, keys[{key_id, role, public, policy}],
//   private{kdf, salt, nonce, ciphertext}
// pca.json
//   format "pushsim-pca/1", public, outstanding_nonces, ledger[{kind, record}],
//   private{kdf, salt, nonce, ciphertext}
//
// Binary values are lowercase hex. The private section is bound to the
// document's identity (tpm_id or the PCA public key) as associated data.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pushsim/crypto.hpp"
#include "pushsim/privacy_ca.hpp"
#include "pushsim/tpm.hpp"

namespace pushsim::keystore {

enum class KeystoreErrc { BadFormat, WrongPassphrase, Inconsistent, Io };

std::string_view to_string(KeystoreErrc code);

class KeystoreError : public std::runtime_error {
 public:
  KeystoreError(KeystoreErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  KeystoreErrc code() const { return code_; }

 private:
  KeystoreErrc code_;
};

/// `rng` supplies the salt and nonce only.
std::string export_tpm(const tpm::Tpm& tpm, std::string_view passphrase, crypto::Rng& rng);
tpm::Tpm import_tpm(std::string_view document, std::string_view passphrase);

std::string export_pca(const pca::PrivacyCa& ca, std::string_view passphrase, crypto::Rng& rng);
pca::PrivacyCa import_pca(std::string_view document, std::string_view passphrase);

std::string tpm_file_name(const tpm::Tpm& tpm);
inline constexpr std::string_view kPcaFileName = "pca.json";

/// Writes one document into `dir`, creating it if needed. Returns the path.
std::filesystem::path write_document(const std::filesystem::path& dir, const std::string& name,
                                     const std::string& document);
std::string read_document(const std::filesystem::path& path);

}  // namespace pushsim::keystore

#include "pushsim/privacy_ca.hpp"

namespace pushsim::pca {

namespace {

template <typename T, typename F>
T decode_or_parse_error(ByteView data, F&& body) {
  try {
    Reader r(data);
    T out = body(r);
    r.expect_end();
    return out;
  } catch (const CodecError& e) {
    throw crypto::CryptoError(crypto::CryptoErrc::Parse, e.what());
  }
}

bool verify_quietly(const crypto::PublicKey& key, ByteView msg, ByteView sig) {
  try {
    return crypto::verify(key, msg, sig);
  } catch (const crypto::CryptoError&) {
    return false;
  }
}

}  // namespace

std::string_view to_string(PcaErrc code) {
  switch (code) {
    case PcaErrc::BadEkc: return "BadEkc";
    case PcaErrc::BadCredential: return "BadCredential";
    case PcaErrc::BadQuote: return "BadQuote";
    case PcaErrc::StaleNonce: return "StaleNonce";
    case PcaErrc::PolicyMismatch: return "PolicyMismatch";
  }
  return "?";
}

Bytes AikCredential::signed_payload() const {
  return Writer()
      .str("pushsim.aik-credential")
      .bytes(aik_public.encode())
      .raw(tpm_id.view())
      .take();
}

Bytes AikCredential::encode() const {
  return Writer()
      .bytes(aik_public.encode())
      .raw(tpm_id.view())
      .f64(issued_at)
      .bytes(signature)
      .take();
}

AikCredential AikCredential::decode(ByteView data) {
  return decode_or_parse_error<AikCredential>(data, [](Reader& r) {
    AikCredential c;
    c.aik_public = crypto::PublicKey::decode(r.bytes());
    c.tpm_id = Digest::from_bytes(r.raw(Digest::kSize));
    c.issued_at = r.f64();
    c.signature = r.bytes();
    return c;
  });
}

Bytes BindingKeyCertificate::signed_payload() const {
  return Writer()
      .str("pushsim.binding-certificate")
      .bytes(binding_public.encode())
      .bytes(policy.encode())
      .raw(aik_id.view())
      .f64(issued_at)
      .take();
}

Bytes BindingKeyCertificate::encode() const {
  return Writer()
      .bytes(binding_public.encode())
      .bytes(policy.encode())
      .raw(aik_id.view())
      .f64(issued_at)
      .bytes(signature)
      .take();
}

BindingKeyCertificate BindingKeyCertificate::decode(ByteView data) {
  return decode_or_parse_error<BindingKeyCertificate>(data, [](Reader& r) {
    BindingKeyCertificate c;
    c.binding_public = crypto::PublicKey::decode(r.bytes());
    c.policy = tpm::PcrPolicy::decode(r.bytes());
    c.aik_id = Digest::from_bytes(r.raw(Digest::kSize));
    c.issued_at = r.f64();
    c.signature = r.bytes();
    return c;
  });
}

bool verify_aik_credential(const crypto::PublicKey& pca_public, const AikCredential& credential) {
  return verify_quietly(pca_public, credential.signed_payload(), credential.signature);
}

bool verify_binding_certificate(const crypto::PublicKey& pca_public,
                                const BindingKeyCertificate& cert) {
  return cert.policy.well_formed() &&
         verify_quietly(pca_public, cert.signed_payload(), cert.signature);
}

AikCredential PrivacyCa::enroll_aik(const crypto::PublicKey& aik_public,
                                    const tpm::EndorsementCredential& ekc,
                                    const crypto::PublicKey& manufacturer_root, double now) {
  if (!verify_quietly(manufacturer_root, ekc.ek_public.encode(), ekc.signature)) {
    throw PcaError(PcaErrc::BadEkc, "endorsement credential does not verify");
  }
  AikCredential c;
  c.aik_public = aik_public;
  c.tpm_id = ekc.tpm_id();
  c.issued_at = now;
  c.signature = crypto::sign(key_.private_key, c.signed_payload());
  ledger_.push_back({"aik_credential", c.encode()});
  return c;
}

tpm::Nonce PrivacyCa::issue_nonce(crypto::Rng& rng) {
  tpm::Nonce n{};
  auto b = rng.bytes(n.size());
  std::copy(b.begin(), b.end(), n.begin());
  outstanding_.insert(n);
  return n;
}

BindingKeyCertificate PrivacyCa::certify_binding_key(const crypto::PublicKey& binding_public,
                                                     const tpm::PcrPolicy& policy,
                                                     const AikCredential& aik_credential,
                                                     const tpm::Quote& quote,
                                                     const tpm::Nonce& expected_nonce,
                                                     double now) {
  const bool issued = outstanding_.erase(expected_nonce) > 0;
  if (!issued || quote.nonce != expected_nonce) {
    throw PcaError(PcaErrc::StaleNonce, "quote nonce was not issued for this exchange");
  }
  if (!verify_aik_credential(key_.public_key, aik_credential)) {
    throw PcaError(PcaErrc::BadCredential, "AIK credential does not verify");
  }
  bool quote_ok = false;
  try {
    quote_ok = tpm::verify_quote(aik_credential.aik_public, quote);
  } catch (const crypto::CryptoError&) {
  }
  if (!quote_ok) throw PcaError(PcaErrc::BadQuote, "quote signature does not verify");
  if (!policy.well_formed() || quote.selection != policy.selection() ||
      quote.composite != policy.composite()) {
    throw PcaError(PcaErrc::PolicyMismatch, "policy values disagree with the quoted state");
  }

  BindingKeyCertificate cert;
  cert.binding_public = binding_public;
  cert.policy = policy;
  cert.aik_id = quote.aik_id;
  cert.issued_at = now;
  cert.signature = crypto::sign(key_.private_key, cert.signed_payload());
  ledger_.push_back({"binding_certificate", cert.encode()});
  return cert;
}

}  // namespace pushsim::pca

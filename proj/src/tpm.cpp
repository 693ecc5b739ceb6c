#include "pushsim/tpm.hpp"

#include <algorithm>

namespace pushsim::tpm {

using crypto::KeyRole;

namespace {

void check_index(std::uint32_t index) {
  if (index >= kPcrCount) {
    throw TpmError(TpmErrc::BadIndex, "PCR index " + std::to_string(index) + " out of range");
  }
}

Digest read_digest(Reader& r) {
  return Digest::from_bytes(r.raw(Digest::kSize));
}

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

// Header authenticated inside every sealed ciphertext.
Bytes sealed_header(const Digest& tpm_id, const PcrPolicy& policy, const Digest& auth) {
  return Writer().raw(tpm_id.view()).bytes(policy.encode()).raw(auth.view()).take();
}

}  // namespace

std::string_view to_string(TpmErrc code) {
  switch (code) {
    case TpmErrc::AlreadyOwned: return "AlreadyOwned";
    case TpmErrc::NotOwned: return "NotOwned";
    case TpmErrc::AuthFail: return "AuthFail";
    case TpmErrc::BadIndex: return "BadIndex";
    case TpmErrc::BadPolicy: return "BadPolicy";
    case TpmErrc::NoSuchKey: return "NoSuchKey";
    case TpmErrc::WrongRole: return "WrongRole";
    case TpmErrc::WrongTpm: return "WrongTpm";
    case TpmErrc::PcrMismatch: return "PcrMismatch";
    case TpmErrc::DecryptFailed: return "DecryptFailed";
  }
  return "?";
}

const Digest& PcrBank::read(std::uint32_t index) const {
  check_index(index);
  return registers_[index];
}

Digest PcrBank::extend(std::uint32_t index, const Digest& value) {
  check_index(index);
  registers_[index] = crypto::hash_pair(registers_[index].view(), value.view());
  return registers_[index];
}

Bytes MeasurementLog::encode() const {
  Writer w;
  w.u32(static_cast<std::uint32_t>(events.size()));
  for (const auto& e : events) {
    w.u32(e.pcr_index).str(e.component_name).raw(e.code_digest.view()).u64(e.sequence_no);
  }
  return w.take();
}

MeasurementLog MeasurementLog::decode(ByteView data) {
  return decode_or_parse_error<MeasurementLog>(data, [](Reader& r) {
    MeasurementLog log;
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      MeasurementEvent e;
      e.pcr_index = r.u32();
      e.component_name = r.str();
      e.code_digest = read_digest(r);
      e.sequence_no = r.u64();
      log.events.push_back(std::move(e));
    }
    return log;
  });
}

PcrBank replay(const MeasurementLog& log) {
  PcrBank bank;
  for (const auto& e : log.events) bank.extend(e.pcr_index, e.code_digest);
  return bank;
}

Digest composite(const PcrBank& bank, const PcrSelection& selection) {
  Writer w;
  for (auto index : selection) w.raw(bank.read(index).view());
  return crypto::hash(w.data());
}

PcrSelection make_selection(std::vector<std::uint32_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.empty()) throw TpmError(TpmErrc::BadPolicy, "empty PCR selection");
  if (indices.back() >= kPcrCount) throw TpmError(TpmErrc::BadPolicy, "PCR selection out of range");
  return indices;
}

PcrSelection PcrPolicy::selection() const {
  PcrSelection out;
  for (const auto& [index, _] : required_values) out.push_back(index);
  return out;
}

Digest PcrPolicy::composite() const {
  Writer w;
  for (const auto& [_, value] : required_values) w.raw(value.view());
  return crypto::hash(w.data());
}

bool PcrPolicy::well_formed() const {
  return !required_values.empty() && required_values.rbegin()->first < kPcrCount;
}

bool PcrPolicy::satisfied_by(const PcrBank& bank) const {
  return std::all_of(required_values.begin(), required_values.end(),
                     [&](const auto& kv) { return bank.read(kv.first) == kv.second; });
}

Bytes PcrPolicy::encode() const {
  Writer w;
  w.u32(static_cast<std::uint32_t>(required_values.size()));
  for (const auto& [index, value] : required_values) w.u32(index).raw(value.view());
  return w.take();
}

PcrPolicy PcrPolicy::decode(ByteView data) {
  return decode_or_parse_error<PcrPolicy>(data, [](Reader& r) {
    PcrPolicy p;
    auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      auto index = r.u32();
      p.required_values[index] = read_digest(r);
    }
    return p;
  });
}

Bytes EndorsementCredential::encode() const {
  return Writer().bytes(ek_public.encode()).bytes(signature).take();
}

EndorsementCredential EndorsementCredential::decode(ByteView data) {
  return decode_or_parse_error<EndorsementCredential>(data, [](Reader& r) {
    EndorsementCredential c;
    c.ek_public = crypto::PublicKey::decode(r.bytes());
    c.signature = r.bytes();
    return c;
  });
}

Bytes SealedBlob::encode() const {
  return Writer()
      .raw(tpm_id.view())
      .bytes(policy.encode())
      .bytes(ciphertext.encode())
      .raw(auth_digest.view())
      .take();
}

SealedBlob SealedBlob::decode(ByteView data) {
  return decode_or_parse_error<SealedBlob>(data, [](Reader& r) {
    SealedBlob b;
    b.tpm_id = read_digest(r);
    b.policy = PcrPolicy::decode(r.bytes());
    b.ciphertext = crypto::HybridCiphertext::decode(r.bytes());
    b.auth_digest = read_digest(r);
    return b;
  });
}

Bytes Quote::signed_payload() const {
  Writer w;
  w.str("pushsim.quote").raw(nonce).u32(static_cast<std::uint32_t>(selection.size()));
  for (auto index : selection) w.u32(index);
  w.raw(composite.view());
  return w.take();
}

Bytes Quote::encode() const {
  Writer w;
  w.raw(aik_id.view()).raw(nonce).u32(static_cast<std::uint32_t>(selection.size()));
  for (auto index : selection) w.u32(index);
  w.raw(composite.view()).bytes(signature);
  return w.take();
}

Quote Quote::decode(ByteView data) {
  return decode_or_parse_error<Quote>(data, [](Reader& r) {
    Quote q;
    q.aik_id = read_digest(r);
    auto nonce = r.raw(kNonceSize);
    std::copy(nonce.begin(), nonce.end(), q.nonce.begin());
    auto n = r.u32();
    if (n > kPcrCount) throw CodecError("quote: selection too large");
    for (std::uint32_t i = 0; i < n; ++i) q.selection.push_back(r.u32());
    q.composite = read_digest(r);
    q.signature = r.bytes();
    return q;
  });
}

bool verify_quote(const crypto::PublicKey& aik_public, const Quote& quote) {
  return aik_public.id() == quote.aik_id &&
         crypto::verify(aik_public, quote.signed_payload(), quote.signature);
}

Tpm Tpm::manufacture(const crypto::Seed& seed, const crypto::PrivateKey& manufacturer_root,
                     crypto::KeyScheme scheme) {
  Tpm t;
  t.scheme_ = scheme;
  crypto::Rng factory(seed);
  t.ek_ = crypto::keygen(factory.fork("ek").seed32(), KeyRole::Endorsement, scheme);
  t.ekc_.ek_public = t.ek_.public_key;
  t.ekc_.signature = crypto::sign(manufacturer_root, t.ek_.public_key.encode());
  t.id_ = t.ek_.key_id;
  t.rng_ = factory.fork("internal");
  return t;
}

void Tpm::take_ownership(ByteView auth_secret) {
  if (owner_auth_) throw TpmError(TpmErrc::AlreadyOwned, "TPM already owned");
  owner_auth_ = crypto::hash(auth_secret);
  storage_key_id_ = add_key(KeyRole::Storage, std::nullopt).key_id;
}

void Tpm::check_auth(ByteView auth) const {
  if (!owner_auth_) throw TpmError(TpmErrc::NotOwned, "TPM has no owner");
  if (crypto::hash(auth) != *owner_auth_) throw TpmError(TpmErrc::AuthFail, "owner auth mismatch");
}

Digest Tpm::extend(std::uint32_t index, const Digest& value) { return pcrs_.extend(index, value); }

MeasurementEvent Tpm::measure(std::uint32_t index, std::string component_name, ByteView code) {
  check_index(index);
  MeasurementEvent e;
  e.pcr_index = index;
  e.component_name = std::move(component_name);
  e.code_digest = crypto::hash(code);
  e.sequence_no = log_.events.size() + 1;
  pcrs_.extend(index, e.code_digest);
  log_.events.push_back(e);
  return e;
}

CreatedKey Tpm::add_key(KeyRole role, std::optional<PcrPolicy> policy) {
  auto pair = crypto::keygen(rng_.seed32(), role, scheme_);
  CreatedKey out{pair.public_key, pair.key_id};
  keys_.insert_or_assign(pair.key_id, KeySlot{std::move(pair), role, std::move(policy)});
  return out;
}

CreatedKey Tpm::create_aik(ByteView auth) {
  check_auth(auth);
  return add_key(KeyRole::AttestationIdentity, std::nullopt);
}

CreatedKey Tpm::create_binding_key(ByteView auth, const PcrPolicy& policy) {
  check_auth(auth);
  if (!policy.well_formed()) throw TpmError(TpmErrc::BadPolicy, "binding policy must select PCRs");
  return add_key(KeyRole::Binding, policy);
}

const KeySlot& Tpm::slot(const Digest& key_id) const {
  auto it = keys_.find(key_id);
  if (it == keys_.end()) throw TpmError(TpmErrc::NoSuchKey, "no key " + key_id.hex());
  return it->second;
}

const crypto::PublicKey& Tpm::public_key(const Digest& key_id) const {
  return slot(key_id).pair.public_key;
}

std::vector<CreatedKey> Tpm::keys(KeyRole role) const {
  std::vector<CreatedKey> out;
  for (const auto& [id, s] : keys_) {
    if (s.role == role) out.push_back({s.pair.public_key, id});
  }
  return out;
}

Quote Tpm::quote(const Digest& aik_id, const Nonce& nonce, const PcrSelection& selection) const {
  const auto& s = slot(aik_id);
  if (s.role != KeyRole::AttestationIdentity) {
    throw TpmError(TpmErrc::WrongRole, "quote requires an AIK");
  }
  Quote q;
  q.aik_id = aik_id;
  q.nonce = nonce;
  q.selection = make_selection(selection);
  q.composite = tpm::composite(pcrs_, q.selection);
  q.signature = crypto::sign(s.pair.private_key, q.signed_payload());
  return q;
}

SealedBlob Tpm::seal(ByteView auth, ByteView data, const PcrSelection& selection) {
  check_auth(auth);
  SealedBlob blob;
  blob.tpm_id = id_;
  for (auto index : make_selection(selection)) blob.policy.required_values[index] = pcrs_.read(index);
  blob.auth_digest = *owner_auth_;
  Bytes inner = Writer()
                    .bytes(sealed_header(blob.tpm_id, blob.policy, blob.auth_digest))
                    .bytes(data)
                    .take();
  blob.ciphertext = crypto::hybrid_encrypt(slot(*storage_key_id_).pair.public_key, inner, rng_);
  return blob;
}

Bytes Tpm::unseal(ByteView auth, const SealedBlob& blob) const {
  if (blob.tpm_id != id_) throw TpmError(TpmErrc::WrongTpm, "blob sealed to another TPM");
  check_auth(auth);
  if (blob.auth_digest != *owner_auth_) throw TpmError(TpmErrc::AuthFail, "blob auth mismatch");
  if (!blob.policy.well_formed() || !blob.policy.satisfied_by(pcrs_)) {
    throw TpmError(TpmErrc::PcrMismatch, "platform state differs from sealed state");
  }
  try {
    auto inner = crypto::hybrid_decrypt(slot(*storage_key_id_).pair.private_key, blob.ciphertext);
    Reader r(inner);
    auto header = r.bytes();
    auto data = r.bytes();
    r.expect_end();
    if (header != sealed_header(blob.tpm_id, blob.policy, blob.auth_digest)) {
      throw TpmError(TpmErrc::DecryptFailed, "sealed header does not match blob");
    }
    return data;
  } catch (const crypto::CryptoError& e) {
    throw TpmError(TpmErrc::DecryptFailed, e.what());
  } catch (const CodecError& e) {
    throw TpmError(TpmErrc::DecryptFailed, e.what());
  }
}

Bytes Tpm::bound_decrypt(ByteView auth, const Digest& binding_key_id,
                         const crypto::HybridCiphertext& ct) const {
  const auto& s = slot(binding_key_id);
  if (s.role != KeyRole::Binding) throw TpmError(TpmErrc::WrongRole, "not a binding key");
  check_auth(auth);
  if (!s.policy->satisfied_by(pcrs_)) {
    throw TpmError(TpmErrc::PcrMismatch, "platform state differs from binding policy");
  }
  try {
    return crypto::hybrid_decrypt(s.pair.private_key, ct);
  } catch (const crypto::CryptoError& e) {
    throw TpmError(TpmErrc::DecryptFailed, e.what());
  }
}

}  // namespace pushsim::tpm

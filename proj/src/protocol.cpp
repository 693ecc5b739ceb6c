#include "pushsim/protocol.hpp"

#include <algorithm>

namespace pushsim::protocol {

using crypto::KeyRole;
using net::ActorId;
using net::Network;

namespace {

template <typename T, typename F>
T decode_message(ByteView data, F&& body) {
  try {
    Reader r(data);
    T out = body(r);
    r.expect_end();
    return out;
  } catch (const CodecError& e) {
    throw ProtocolError(ProtocolErrc::BadMessage, e.what());
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(ProtocolErrc::BadMessage, e.what());
  }
}

template <typename T>
T decode_whole(ByteView data) {
  try {
    return T::decode(data);
  } catch (const crypto::CryptoError& e) {
    throw ProtocolError(ProtocolErrc::BadMessage, e.what());
  }
}

tpm::Nonce read_nonce(Reader& r) {
  tpm::Nonce n{};
  auto b = r.raw(n.size());
  std::copy(b.begin(), b.end(), n.begin());
  return n;
}

// Sends and returns the envelope as it crossed the network.
const net::Envelope& transmit(Network& net, SessionTranscript* steps, std::string_view label,
                              const ActorId& from, const ActorId& to, std::string msg_type,
                              Bytes payload) {
  auto receipt = net.send(from, to, msg_type, std::move(payload));
  if (steps) {
    steps->steps.push_back({std::string(label), from + "->" + to, receipt.seq, std::move(msg_type)});
  }
  return net.transcript().back();
}

Bytes channel_ad(const SecureChannel& ch, std::string_view msg_type) {
  return Writer().str("pushsim.channel").u64(ch.id).str(msg_type).take();
}

Bytes channel_wrap(const SecureChannel& ch, std::string_view msg_type, ByteView inner,
                   crypto::Rng& rng) {
  auto nonce = rng.bytes(crypto::kAeadNonceSize);
  auto ct = crypto::aead_seal(ch.key, nonce, inner, channel_ad(ch, msg_type));
  return Writer().raw(nonce).raw(ct).take();
}

Bytes channel_unwrap(const SecureChannel& ch, const net::Envelope& e) {
  ByteView payload = e.payload;
  if (payload.size() < crypto::kAeadNonceSize) {
    throw ProtocolError(ProtocolErrc::BadMessage, "channel record too short");
  }
  try {
    return crypto::aead_open(ch.key, payload.first(crypto::kAeadNonceSize),
                             payload.subspan(crypto::kAeadNonceSize), channel_ad(ch, e.msg_type));
  } catch (const crypto::CryptoError& err) {
    throw ProtocolError(ProtocolErrc::BadMessage, err.what());
  }
}

void fail_remaining(SessionTranscript& st, std::size_t total, const Outcome& outcome) {
  while (st.items.size() < total) st.items.push_back(outcome);
  st.outcome = outcome;
}

Outcome failed(std::string reason) { return {OutcomeKind::Failed, std::move(reason)}; }

}  // namespace

std::string_view to_string(ProtocolErrc code) {
  switch (code) {
    case ProtocolErrc::NothingPending: return "NothingPending";
    case ProtocolErrc::UnregisteredUser: return "UnregisteredUser";
    case ProtocolErrc::RegistrationRefused: return "RegistrationRefused";
    case ProtocolErrc::MissingAik: return "MissingAik";
    case ProtocolErrc::BadMessage: return "BadMessage";
  }
  return "?";
}

std::string_view to_string(UntrustedReason reason) {
  switch (reason) {
    case UntrustedReason::MalformedEvidence: return "MalformedEvidence";
    case UntrustedReason::BadCredential: return "BadCredential";
    case UntrustedReason::BadQuoteSignature: return "BadQuoteSignature";
    case UntrustedReason::StaleNonce: return "StaleNonce";
    case UntrustedReason::SelectionMismatch: return "SelectionMismatch";
    case UntrustedReason::LogReplayMismatch: return "LogReplayMismatch";
    case UntrustedReason::LogOrderViolation: return "LogOrderViolation";
    case UntrustedReason::UnknownMeasurement: return "UnknownMeasurement";
    case UntrustedReason::MissingComponent: return "MissingComponent";
  }
  return "?";
}

std::string Verdict::str() const {
  return trusted ? "Trusted" : "Untrusted(" + std::string(to_string(reason)) + ")";
}

std::string Outcome::str() const {
  switch (kind) {
    case OutcomeKind::Delivered: return "Delivered";
    case OutcomeKind::DeliveredLocked: return "Delivered-but-Locked";
    case OutcomeKind::Refused: return "Refused(" + reason + ")";
    case OutcomeKind::Failed: return "Failed(" + reason + ")";
  }
  return "?";
}

void ReferenceMeasurementDb::allow(const std::string& component, const Digest& code_digest) {
  entries[component].insert(code_digest);
}

bool ReferenceMeasurementDb::allows(const tpm::MeasurementEvent& event) const {
  auto it = entries.find(event.component_name);
  return it != entries.end() && it->second.contains(event.code_digest);
}

bool ReferenceMeasurementDb::well_formed() const {
  return std::all_of(required_components.begin(), required_components.end(),
                     [&](const auto& name) { return entries.contains(name); });
}

Bytes AttestationEvidence::encode() const {
  return Writer().bytes(quote.encode()).bytes(log.encode()).bytes(credential.encode()).take();
}

AttestationEvidence AttestationEvidence::decode(ByteView data) {
  return decode_message<AttestationEvidence>(data, [](Reader& r) {
    AttestationEvidence ev;
    ev.quote = tpm::Quote::decode(r.bytes());
    ev.log = tpm::MeasurementLog::decode(r.bytes());
    ev.credential = pca::AikCredential::decode(r.bytes());
    return ev;
  });
}

Verdict verify_evidence(const AttestationEvidence& ev, const tpm::Nonce& expected_nonce,
                        const tpm::PcrSelection& selection, const crypto::PublicKey& pca_public,
                        const ReferenceMeasurementDb& db) {
  using R = UntrustedReason;
  if (!pca::verify_aik_credential(pca_public, ev.credential)) {
    return Verdict::Untrusted(R::BadCredential, "AIK credential not issued by the trusted PCA");
  }
  bool quote_ok = false;
  try {
    quote_ok = tpm::verify_quote(ev.credential.aik_public, ev.quote);
  } catch (const crypto::CryptoError&) {
  }
  if (!quote_ok) return Verdict::Untrusted(R::BadQuoteSignature);
  if (ev.quote.nonce != expected_nonce) return Verdict::Untrusted(R::StaleNonce);
  if (ev.quote.selection != selection) return Verdict::Untrusted(R::SelectionMismatch);
  for (const auto& e : ev.log.events) {
    if (std::find(selection.begin(), selection.end(), e.pcr_index) == selection.end()) {
      return Verdict::Untrusted(R::SelectionMismatch,
                                "log event on unquoted PCR " + std::to_string(e.pcr_index));
    }
  }

  tpm::PcrBank replayed = tpm::replay(ev.log);
  if (tpm::composite(replayed, selection) != ev.quote.composite) {
    return Verdict::Untrusted(R::LogReplayMismatch);
  }
  for (std::size_t k = 0; k < ev.log.events.size(); ++k) {
    if (ev.log.events[k].sequence_no != k + 1) {
      return Verdict::Untrusted(R::LogOrderViolation,
                                "event " + std::to_string(k + 1) + " out of sequence");
    }
  }
  for (const auto& e : ev.log.events) {
    if (!db.allows(e)) return Verdict::Untrusted(R::UnknownMeasurement, e.component_name);
  }
  for (const auto& name : db.required_components) {
    bool present = std::any_of(ev.log.events.begin(), ev.log.events.end(),
                               [&](const auto& e) { return e.component_name == name; });
    if (!present) return Verdict::Untrusted(R::MissingComponent, name);
  }
  return Verdict::Trusted();
}

void DataSource::offer(std::string user_id, Bytes payload) {
  outbox_.push_back({std::move(user_id), std::move(payload)});
}

SyncServerActor::SyncServerActor(ActorId id, crypto::PublicKey pca_public,
                                 ReferenceMeasurementDb db, crypto::Rng rng)
    : id_(std::move(id)), pca_public_(std::move(pca_public)), db_(std::move(db)), rng_(rng) {
  for (std::uint32_t i = 0; i < tpm::kPcrCount; ++i) attest_selection.push_back(i);
}

std::vector<PendingItem> SyncServerActor::take_pending(const std::string& user_id,
                                                       std::size_t max_items) {
  std::vector<PendingItem> out;
  for (auto it = pending_.begin(); it != pending_.end() && out.size() < max_items;) {
    if (it->user_id == user_id) {
      out.push_back(std::move(*it));
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

void SyncServerActor::register_binding(const std::string& user_id,
                                       const pca::BindingKeyCertificate& cert) {
  if (!pca::verify_binding_certificate(pca_public_, cert)) {
    throw ProtocolError(ProtocolErrc::RegistrationRefused,
                        "binding certificate for " + user_id + " does not verify");
  }
  registry_.insert_or_assign(user_id, Registration{cert, cert.binding_public});
}

std::vector<BootComponent> standard_boot_chain() {
  return {
      {0, "bios", to_bytes("pushsim reference firmware 2.1")},
      {4, "bootloader", to_bytes("pushsim bootloader 1.0.3")},
      {8, "kernel", to_bytes("pushsim mobile kernel 4.2")},
      {kAppPcr, kEmailApp, to_bytes("pushsim e-mail client 3.7")},
  };
}

ReferenceMeasurementDb standard_reference_db() {
  ReferenceMeasurementDb db;
  for (const auto& c : standard_boot_chain()) db.allow(c.name, crypto::hash(c.code));
  db.required_components = {kEmailApp};
  return db;
}

DeviceActor::DeviceActor(ActorId id, std::string user_id, tpm::Tpm tpm, Bytes auth,
                         crypto::Rng rng)
    : id_(std::move(id)),
      user_id_(std::move(user_id)),
      tpm_(std::move(tpm)),
      auth_(std::move(auth)),
      rng_(rng) {}

void DeviceActor::boot(const std::vector<BootComponent>& chain) {
  for (const auto& c : chain) {
    tpm_.measure(c.pcr, c.name, c.code);
    if (c.name == kEmailApp) app_measured_ = true;
  }
}

void notify(DataSource&, SyncServerActor& server, std::string user_id, Bytes payload) {
  server.enqueue({std::move(user_id), std::move(payload)});
}

std::size_t poll(DataSource& source, SyncServerActor& server) {
  std::size_t moved = 0;
  auto& outbox = source.outbox();
  while (!outbox.empty()) {
    server.enqueue(std::move(outbox.front()));
    outbox.pop_front();
    ++moved;
  }
  return moved;
}

SecureChannel establish_secure_channel(SyncServerActor& server, DeviceActor& device, Network& net,
                                       SessionTranscript* steps) {
  auto ephemeral = crypto::keygen(device.rng().seed32(), KeyRole::Session, device.tpm().scheme());
  const auto& hello = transmit(net, steps, "S1.2", device.id(), server.id(),
                               "s1.step2.channel_hello", ephemeral.public_key.encode());

  SecureChannel ch{hello.seq, server.id(), device.id(), server.rng().bytes(crypto::kAeadKeySize)};
  auto peer = decode_whole<crypto::PublicKey>(hello.payload);
  auto wrapped = crypto::hybrid_encrypt(peer, Writer().u64(ch.id).raw(ch.key).data(), server.rng());
  const auto& key_msg = transmit(net, steps, "S1.2", server.id(), device.id(),
                                 "s1.step2.channel_key", wrapped.encode());

  auto opened = crypto::hybrid_decrypt(ephemeral.private_key,
                                       decode_whole<crypto::HybridCiphertext>(key_msg.payload));
  Reader r(opened);
  if (r.u64() != ch.id || r.raw(crypto::kAeadKeySize) != ch.key) {
    throw ProtocolError(ProtocolErrc::BadMessage, "channel key confirmation failed");
  }
  net.charge("channel_setup");
  return ch;
}

Verdict attest_device(SyncServerActor& server, DeviceActor& device, Network& net,
                      const SecureChannel& ch, SessionTranscript* steps) {
  tpm::Nonce nonce{};
  {
    auto b = server.rng().bytes(nonce.size());
    std::copy(b.begin(), b.end(), nonce.begin());
  }
  Writer challenge;
  challenge.raw(nonce).u32(static_cast<std::uint32_t>(server.attest_selection.size()));
  for (auto i : server.attest_selection) challenge.u32(i);
  const auto& req = transmit(
      net, steps, "S1.3", server.id(), device.id(), "s1.step3.attest_challenge",
      channel_wrap(ch, "s1.step3.attest_challenge", challenge.data(), server.rng()));

  // Device side.
  auto [dev_nonce, dev_selection] =
      decode_message<std::pair<tpm::Nonce, tpm::PcrSelection>>(channel_unwrap(ch, req), [](Reader& r) {
        auto n = read_nonce(r);
        tpm::PcrSelection sel(r.u32());
        if (sel.size() > tpm::kPcrCount) throw CodecError("selection too large");
        for (auto& i : sel) i = r.u32();
        return std::pair{n, sel};
      });
  if (!device.aik) throw ProtocolError(ProtocolErrc::MissingAik, device.id() + " has no AIK");
  AttestationEvidence evidence{device.tpm().quote(device.aik->key_id, dev_nonce, dev_selection),
                               device.tpm().log(), device.aik->credential};
  const auto& resp = transmit(
      net, steps, "S1.3", device.id(), server.id(), "s1.step3.attest_evidence",
      channel_wrap(ch, "s1.step3.attest_evidence", evidence.encode(), device.rng()));

  // Server side.
  Verdict verdict;
  try {
    auto received = AttestationEvidence::decode(channel_unwrap(ch, resp));
    verdict = verify_evidence(received, nonce, server.attest_selection, server.pca_public(),
                              server.reference_db());
  } catch (const ProtocolError& e) {
    verdict = Verdict::Untrusted(UntrustedReason::MalformedEvidence, e.what());
  }
  net.charge("remote_attestation");

  std::string type = verdict.trusted ? "s1.step3.verdict_trusted" : "s1.step3.verdict_untrusted";
  Bytes body = Writer().u8(verdict.trusted ? 1 : 0).str(to_string(verdict.reason)).take();
  transmit(net, steps, "S1.3", server.id(), device.id(), type,
           channel_wrap(ch, type, body, server.rng()));
  return verdict;
}

void prefetch_aiks(DeviceActor& device, Network& net, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    device.prefetched_aiks.push_back(device.tpm().create_aik(device.auth()).key_id);
    net.charge("aik_generation");
  }
}

void enroll_aik(DeviceActor& device, Pki& pki, Network& net, SessionTranscript* steps) {
  Digest aik_id;
  if (!device.prefetched_aiks.empty()) {
    aik_id = device.prefetched_aiks.front();
    device.prefetched_aiks.pop_front();
  } else {
    aik_id = device.tpm().create_aik(device.auth()).key_id;
    net.charge("aik_generation");
  }
  const auto& aik_public = device.tpm().public_key(aik_id);

  const auto& req = transmit(net, steps, "AIK", device.id(), pki.id, "aik.enroll_request",
                             Writer()
                                 .bytes(aik_public.encode())
                                 .bytes(device.tpm().ekc().encode())
                                 .take());
  auto [pub, ekc] = decode_message<std::pair<crypto::PublicKey, tpm::EndorsementCredential>>(
      req.payload, [](Reader& r) {
        auto p = crypto::PublicKey::decode(r.bytes());
        auto e = tpm::EndorsementCredential::decode(r.bytes());
        return std::pair{p, e};
      });
  auto credential = pki.ca.enroll_aik(pub, ekc, pki.manufacturer_root, net.clock().now());
  net.charge("pca_roundtrip");
  const auto& resp = transmit(net, steps, "AIK", pki.id, device.id(), "aik.enroll_credential",
                              credential.encode());
  device.aik = AikMaterial{aik_id, decode_whole<pca::AikCredential>(resp.payload)};
}

namespace {

SessionTranscript scenario1_session(SyncServerActor& server, DeviceActor& device, Pki& pki,
                                    Network& net, const PushOptions& options,
                                    std::vector<PendingItem> items) {
  SessionTranscript st;
  st.scenario = Scenario::PerPushAttestation;
  const std::size_t total = items.size();
  try {
    auto ch = establish_secure_channel(server, device, net, &st);
    if (items.empty()) {
      st.outcome = {OutcomeKind::Delivered, {}};
      return st;
    }
    if (options.fresh_aik) enroll_aik(device, pki, net, &st);

    auto verdict = attest_device(server, device, net, ch, &st);
    st.verdict = verdict;
    if (!verdict.trusted) {
      fail_remaining(st, total, {OutcomeKind::Refused, std::string(to_string(verdict.reason))});
      return st;
    }

    std::optional<crypto::KeyPair> content_key;
    std::optional<crypto::PublicKey> server_view;
    if (options.independent_encryption) {
      content_key = crypto::keygen(device.rng().seed32(), KeyRole::Session, device.tpm().scheme());
      const auto& kx = transmit(
          net, &st, "S1.4", device.id(), server.id(), "s1.step4.key_exchange",
          channel_wrap(ch, "s1.step4.key_exchange", content_key->public_key.encode(), device.rng()));
      server_view = decode_whole<crypto::PublicKey>(channel_unwrap(ch, kx));
      net.charge("key_exchange");
    }

    for (auto& item : items) {
      Writer inner;
      if (server_view) {
        inner.u8(1).bytes(crypto::hybrid_encrypt(*server_view, item.payload, server.rng()).encode());
      } else {
        inner.u8(0).bytes(item.payload);
      }
      const auto& data = transmit(net, &st, "S1.5", server.id(), device.id(), "s1.step5.data",
                                  channel_wrap(ch, "s1.step5.data", inner.data(), server.rng()));

      auto received = channel_unwrap(ch, data);
      Reader r(received);
      bool wrapped = r.u8() == 1;
      auto content = r.bytes();
      Bytes plaintext = wrapped ? crypto::hybrid_decrypt(content_key->private_key,
                                                         crypto::HybridCiphertext::decode(content))
                                : std::move(content);
      device.sealed_inbox.push_back(
          device.tpm().seal(device.auth(), plaintext, options.seal_selection));
      net.charge("seal_op");
      net.record_local(device.id(), "seal");
      st.items.push_back({OutcomeKind::Delivered, {}});
    }
    st.outcome = {OutcomeKind::Delivered, {}};
  } catch (const net::NetError& e) {
    fail_remaining(st, total, failed(std::string(net::to_string(e.code()))));
  } catch (const pca::PcaError& e) {
    fail_remaining(st, total, failed(std::string(pca::to_string(e.code()))));
  }
  return st;
}

}  // namespace

SessionTranscript scenario1_push(SyncServerActor& server, DeviceActor& device, Pki& pki,
                                 Network& net, const PushOptions& options) {
  auto items = server.take_pending(device.user_id(), 1);
  if (items.empty()) {
    throw ProtocolError(ProtocolErrc::NothingPending, "no payload pending for " + device.user_id());
  }
  return scenario1_session(server, device, pki, net, options, std::move(items));
}

tpm::PcrPolicy current_policy(const tpm::Tpm& t, const tpm::PcrSelection& selection) {
  tpm::PcrPolicy p;
  for (auto i : tpm::make_selection(selection)) p.required_values[i] = t.pcrs().read(i);
  return p;
}

pca::BindingKeyCertificate scenario2_provision(DeviceActor& device, Pki& pki,
                                               SyncServerActor& server, Network& net,
                                               const tpm::PcrPolicy& policy) {
  if (!device.aik) enroll_aik(device, pki, net);

  auto binding = device.tpm().create_binding_key(device.auth(), policy);
  net.charge("aik_generation");

  // Stage 1, step 1: binding key and credentials to the PCA.
  const auto& req = transmit(net, nullptr, "S2.1", device.id(), pki.id, "s2.step1.binding_request",
                             Writer()
                                 .bytes(binding.public_key.encode())
                                 .bytes(policy.encode())
                                 .bytes(device.tpm().ekc().encode())
                                 .bytes(device.aik->credential.encode())
                                 .take());
  struct Request {
    crypto::PublicKey binding_public;
    tpm::PcrPolicy policy;
    tpm::EndorsementCredential ekc;
    pca::AikCredential credential;
  };
  auto request = decode_message<Request>(req.payload, [](Reader& r) {
    Request out;
    out.binding_public = crypto::PublicKey::decode(r.bytes());
    out.policy = tpm::PcrPolicy::decode(r.bytes());
    out.ekc = tpm::EndorsementCredential::decode(r.bytes());
    out.credential = pca::AikCredential::decode(r.bytes());
    return out;
  });

  // Step 2: online attestation over the policy's registers.
  auto nonce = pki.ca.issue_nonce(pki.rng);
  const auto& challenge = transmit(net, nullptr, "S2.2", pki.id, device.id(),
                                   "s2.step2.attest_challenge", Bytes(nonce.begin(), nonce.end()));
  auto device_nonce = decode_message<tpm::Nonce>(challenge.payload, read_nonce);
  auto quote = device.tpm().quote(device.aik->key_id, device_nonce, policy.selection());
  const auto& evidence = transmit(net, nullptr, "S2.2", device.id(), pki.id,
                                  "s2.step2.attest_evidence", quote.encode());
  net.charge("remote_attestation");

  // Step 3: certificate enclosing the PCR values.
  auto cert = pki.ca.certify_binding_key(request.binding_public, request.policy, request.credential,
                                         decode_whole<tpm::Quote>(evidence.payload), nonce,
                                         net.clock().now());
  net.charge("pca_roundtrip");
  const auto& issued = transmit(net, nullptr, "S2.3", pki.id, device.id(), "s2.step3.certificate",
                                cert.encode());
  device.binding = BindingMaterial{binding.key_id,
                                   decode_whole<pca::BindingKeyCertificate>(issued.payload)};

  // Stage 2, step 4: registration at the synchronisation server.
  const auto& reg = transmit(net, nullptr, "S2.4", device.id(), server.id(), "s2.step4.register",
                             Writer()
                                 .str(device.user_id())
                                 .bytes(device.binding->certificate.encode())
                                 .take());
  auto [user, received] = decode_message<std::pair<std::string, pca::BindingKeyCertificate>>(
      reg.payload, [](Reader& r) {
        auto u = r.str();
        return std::pair{u, pca::BindingKeyCertificate::decode(r.bytes())};
      });
  server.register_binding(user, received);
  transmit(net, nullptr, "S2.4", server.id(), device.id(), "s2.step4.registered", Bytes{1});
  return cert;
}

namespace {

Outcome scenario2_deliver(SyncServerActor& server, DeviceActor& device, Network& net,
                          SessionTranscript& st, const Registration& reg, const Bytes& payload) {
  auto ct = crypto::hybrid_encrypt(reg.binding_public, payload, server.rng());
  const auto& data =
      transmit(net, &st, "S2.6", server.id(), device.id(), "s2.step6.data", ct.encode());

  device.bound_inbox.push_back(decode_whole<crypto::HybridCiphertext>(data.payload));
  if (!device.binding) {
    net.record_local(device.id(), "open_failed");
    return {OutcomeKind::DeliveredLocked, "NoBindingKey"};
  }
  try {
    device.tpm().bound_decrypt(device.auth(), device.binding->key_id, device.bound_inbox.back());
    net.record_local(device.id(), "open_ok");
    return {OutcomeKind::Delivered, {}};
  } catch (const tpm::TpmError& e) {
    net.record_local(device.id(), e.code() == tpm::TpmErrc::PcrMismatch ? "open_pcr_mismatch"
                                                                       : "open_failed");
    return {OutcomeKind::DeliveredLocked, std::string(tpm::to_string(e.code()))};
  }
}

SessionTranscript scenario2_session(SyncServerActor& server, DeviceActor& device, Network& net,
                                    std::size_t max_items, bool require_item) {
  auto reg = server.registry().find(device.user_id());
  if (reg == server.registry().end()) {
    throw ProtocolError(ProtocolErrc::UnregisteredUser, device.user_id() + " is not registered");
  }
  auto items = server.take_pending(device.user_id(), max_items);
  if (require_item && items.empty()) {
    throw ProtocolError(ProtocolErrc::NothingPending, "no payload pending for " + device.user_id());
  }
  SessionTranscript st;
  st.scenario = Scenario::BindingKey;
  st.outcome = {OutcomeKind::Delivered, {}};
  try {
    for (const auto& item : items) {
      st.items.push_back(scenario2_deliver(server, device, net, st, reg->second, item.payload));
      if (st.items.back().kind == OutcomeKind::DeliveredLocked) st.outcome = st.items.back();
    }
  } catch (const net::NetError& e) {
    fail_remaining(st, items.size(), failed(std::string(net::to_string(e.code()))));
  }
  return st;
}

}  // namespace

SessionTranscript scenario2_push(SyncServerActor& server, DeviceActor& device, Network& net) {
  return scenario2_session(server, device, net, 1, true);
}

SessionTranscript bulk_push(SyncServerActor& server, DeviceActor& device, Pki& pki, Network& net,
                            Scenario scenario, const PushOptions& options,
                            std::size_t max_items) {
  if (scenario == Scenario::BindingKey) {
    return scenario2_session(server, device, net, max_items, false);
  }
  return scenario1_session(server, device, pki, net, options,
                           server.take_pending(device.user_id(), max_items));
}

void tamper(DeviceActor& device, Network& net, std::uint32_t pcr) {
  device.tpm().extend(pcr, crypto::hash(std::string_view("pushsim unmeasured modification")));
  net.record_local(device.id(), "tamper");
}

std::vector<OpenAttempt> open_inbox(DeviceActor& device, Network& net) {
  std::vector<OpenAttempt> out;
  auto attempt = [&](Scenario scenario, std::size_t index, auto&& open) {
    OpenAttempt a{scenario, index, false, std::nullopt, 0};
    try {
      open();
      a.ok = true;
    } catch (const tpm::TpmError& e) {
      a.error = e.code();
    }
    std::string event = a.ok ? "open_ok"
                        : a.error == tpm::TpmErrc::PcrMismatch ? "open_pcr_mismatch"
                                                                : "open_failed";
    a.seq = net.record_local(device.id(), event);
    out.push_back(a);
  };
  for (std::size_t i = 0; i < device.sealed_inbox.size(); ++i) {
    attempt(Scenario::PerPushAttestation, i,
            [&] { device.tpm().unseal(device.auth(), device.sealed_inbox[i]); });
  }
  for (std::size_t i = 0; i < device.bound_inbox.size(); ++i) {
    attempt(Scenario::BindingKey, i, [&] {
      if (!device.binding) throw tpm::TpmError(tpm::TpmErrc::NoSuchKey, "no binding key");
      device.tpm().bound_decrypt(device.auth(), device.binding->key_id, device.bound_inbox[i]);
    });
  }
  return out;
}

bool is_attestation_type(std::string_view msg_type) {
  return msg_type.find("attest") != std::string_view::npos ||
         msg_type.find("verdict") != std::string_view::npos;
}

}  // namespace pushsim::protocol

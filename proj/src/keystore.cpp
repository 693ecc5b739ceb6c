#include "pushsim/keystore.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pushsim::tpm {

// Reaches into Tpm internals on behalf of the key store.
class TpmPersistence {
 public:
  static nlohmann::ordered_json to_json(const Tpm& t, std::string_view passphrase,
                                        crypto::Rng& rng);
  static Tpm from_json(const nlohmann::json& doc, std::string_view passphrase);
};

}  // namespace pushsim::tpm

namespace pushsim::pca {

class PcaPersistence {
 public:
  static nlohmann::ordered_json to_json(const PrivacyCa& ca, std::string_view passphrase,
                                        crypto::Rng& rng);
  static PrivacyCa from_json(const nlohmann::json& doc, std::string_view passphrase);
};

}  // namespace pushsim::pca

namespace pushsim::keystore {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using crypto::Digest;

namespace {

constexpr std::string_view kTpmFormat = "pushsim-tpm/1";
constexpr std::string_view kPcaFormat = "pushsim-pca/1";
constexpr std::string_view kKdfName = "argon2id13-min";

[[noreturn]] void bad_format(const std::string& what) {
  throw KeystoreError(KeystoreErrc::BadFormat, what);
}

Bytes hex_field(const json& j, const char* key) {
  try {
    return from_hex(j.at(key).get<std::string>());
  } catch (const CodecError& e) {
    bad_format(std::string(key) + ": " + e.what());
  }
}

Digest digest_field(const json& j, const char* key) {
  try {
    return Digest::from_bytes(hex_field(j, key));
  } catch (const crypto::CryptoError& e) {
    bad_format(std::string(key) + ": " + e.what());
  }
}

ordered_json seal_private(ByteView secret, ByteView ad, std::string_view passphrase,
                          crypto::Rng& rng) {
  auto salt = rng.bytes(crypto::kPassphraseSaltSize);
  auto nonce = rng.bytes(crypto::kAeadNonceSize);
  auto key = crypto::passphrase_key(passphrase, salt);
  ordered_json j;
  j["kdf"] = kKdfName;
  j["salt"] = to_hex(salt);
  j["nonce"] = to_hex(nonce);
  j["ciphertext"] = to_hex(crypto::aead_seal(key, nonce, secret, ad));
  return j;
}

Bytes open_private(const json& j, ByteView ad, std::string_view passphrase) {
  if (j.at("kdf").get<std::string>() != kKdfName) bad_format("unsupported kdf");
  auto salt = hex_field(j, "salt");
  auto nonce = hex_field(j, "nonce");
  if (salt.size() != crypto::kPassphraseSaltSize || nonce.size() != crypto::kAeadNonceSize) {
    bad_format("bad salt or nonce size");
  }
  auto key = crypto::passphrase_key(passphrase, salt);
  try {
    return crypto::aead_open(key, nonce, hex_field(j, "ciphertext"), ad);
  } catch (const crypto::CryptoError&) {
    throw KeystoreError(KeystoreErrc::WrongPassphrase,
                        "private section does not open with this passphrase");
  }
}

void expect_format(const json& doc, std::string_view format) {
  if (!doc.is_object() || doc.value("format", std::string()) != format) {
    bad_format("expected format " + std::string(format));
  }
}

json parse(std::string_view document) {
  try {
    return json::parse(document);
  } catch (const json::exception& e) {
    bad_format(e.what());
  }
}

template <typename F>
auto guarded(F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    bad_format(e.what());
  } catch (const CodecError& e) {
    bad_format(e.what());
  } catch (const crypto::CryptoError& e) {
    bad_format(e.what());
  } catch (const std::invalid_argument& e) {
    bad_format(e.what());
  }
}

ordered_json policy_json(const tpm::PcrPolicy& policy) {
  ordered_json j = ordered_json::object();
  for (const auto& [index, value] : policy.required_values) j[std::to_string(index)] = value.hex();
  return j;
}

tpm::PcrPolicy policy_from_json(const json& j) {
  tpm::PcrPolicy p;
  for (const auto& [index, value] : j.items()) {
    std::size_t used = 0;
    unsigned long i = std::stoul(index, &used);
    if (used != index.size() || i >= tpm::kPcrCount) bad_format("bad policy index " + index);
    p.required_values[static_cast<std::uint32_t>(i)] = Digest::from_hex(value.get<std::string>());
  }
  return p;
}

}  // namespace

std::string_view to_string(KeystoreErrc code) {
  switch (code) {
    case KeystoreErrc::BadFormat: return "BadFormat";
    case KeystoreErrc::WrongPassphrase: return "WrongPassphrase";
    case KeystoreErrc::Inconsistent: return "Inconsistent";
    case KeystoreErrc::Io: return "Io";
  }
  return "?";
}

}  // namespace pushsim::keystore

namespace pushsim::tpm {

using namespace pushsim::keystore;

nlohmann::ordered_json TpmPersistence::to_json(const Tpm& t, std::string_view passphrase,
                                               crypto::Rng& rng) {
  ordered_json doc;
  doc["format"] = kTpmFormat;
  doc["tpm_id"] = t.id_.hex();
  doc["scheme"] = crypto::to_string(t.scheme_);
  doc["engine_label"] = t.engine_label_ ? ordered_json(*t.engine_label_) : ordered_json(nullptr);
  doc["ek_public"] = to_hex(t.ekc_.ek_public.encode());
  doc["ekc_signature"] = to_hex(t.ekc_.signature);

  auto& pcrs = doc["pcrs"] = ordered_json::array();
  for (const auto& r : t.pcrs_.registers_) pcrs.push_back(r.hex());

  auto& log = doc["log"] = ordered_json::array();
  for (const auto& e : t.log_.events) {
    ordered_json j;
    j["sequence_no"] = e.sequence_no;
    j["pcr_index"] = e.pcr_index;
    j["component_name"] = e.component_name;
    j["code_digest"] = e.code_digest.hex();
    log.push_back(j);
  }

  doc["storage_key_id"] =
      t.storage_key_id_ ? ordered_json(t.storage_key_id_->hex()) : ordered_json(nullptr);

  Writer secret;
  secret.u8(t.owner_auth_ ? 1 : 0);
  if (t.owner_auth_) secret.raw(t.owner_auth_->view());
  secret.bytes(t.ek_.private_key.encode());
  secret.raw(t.rng_.seed()).u64(t.rng_.counter());
  secret.u32(static_cast<std::uint32_t>(t.keys_.size()));

  auto& keys = doc["keys"] = ordered_json::array();
  for (const auto& [id, slot] : t.keys_) {
    ordered_json j;
    j["key_id"] = id.hex();
    j["role"] = crypto::to_string(slot.role);
    j["public"] = to_hex(slot.pair.public_key.encode());
    j["policy"] = slot.policy ? policy_json(*slot.policy) : ordered_json(nullptr);
    keys.push_back(j);
    secret.raw(id.view()).bytes(slot.pair.private_key.encode());
  }

  doc["private"] = seal_private(secret.data(), t.id_.view(), passphrase, rng);
  return doc;
}

Tpm TpmPersistence::from_json(const nlohmann::json& doc, std::string_view passphrase) {
  expect_format(doc, kTpmFormat);
  Tpm t;
  Bytes secret;
  guarded([&] {
    t.id_ = digest_field(doc, "tpm_id");
    t.scheme_ = crypto::parse_key_scheme(doc.at("scheme").get<std::string>());
    if (!doc.at("engine_label").is_null()) t.engine_label_ = doc["engine_label"].get<std::string>();
    t.ekc_.ek_public = crypto::PublicKey::decode(hex_field(doc, "ek_public"));
    t.ekc_.signature = hex_field(doc, "ekc_signature");

    const auto& pcrs = doc.at("pcrs");
    if (!pcrs.is_array() || pcrs.size() != kPcrCount) bad_format("pcrs must hold 24 registers");
    for (std::size_t i = 0; i < kPcrCount; ++i) {
      t.pcrs_.registers_[i] = Digest::from_hex(pcrs[i].get<std::string>());
    }

    for (const auto& j : doc.at("log")) {
      MeasurementEvent e;
      e.sequence_no = j.at("sequence_no").get<std::uint64_t>();
      e.pcr_index = j.at("pcr_index").get<std::uint32_t>();
      e.component_name = j.at("component_name").get<std::string>();
      e.code_digest = digest_field(j, "code_digest");
      t.log_.events.push_back(std::move(e));
    }

    if (!doc.at("storage_key_id").is_null()) t.storage_key_id_ = digest_field(doc, "storage_key_id");

    for (const auto& j : doc.at("keys")) {
      KeySlot slot;
      slot.role = crypto::parse_key_role(j.at("role").get<std::string>());
      slot.pair.public_key = crypto::PublicKey::decode(hex_field(j, "public"));
      slot.pair.key_id = digest_field(j, "key_id");
      if (!j.at("policy").is_null()) slot.policy = policy_from_json(j["policy"]);
      t.keys_.emplace(slot.pair.key_id, std::move(slot));
    }
    secret = open_private(doc.at("private"), t.id_.view(), passphrase);
    return 0;
  });

  if (t.ekc_.ek_public.id() != t.id_) {
    throw KeystoreError(KeystoreErrc::Inconsistent, "tpm_id does not match ek_public");
  }

  guarded([&] {
    Reader r(secret);
    if (r.u8() == 1) t.owner_auth_ = Digest::from_bytes(r.raw(Digest::kSize));
    t.ek_.public_key = t.ekc_.ek_public;
    t.ek_.private_key = crypto::PrivateKey::decode(r.bytes());
    t.ek_.key_id = t.id_;
    crypto::Seed seed{};
    auto seed_bytes = r.raw(seed.size());
    std::copy(seed_bytes.begin(), seed_bytes.end(), seed.begin());
    std::uint64_t counter = r.u64();
    t.rng_ = crypto::Rng(seed, counter);

    std::uint32_t count = r.u32();
    if (count != t.keys_.size()) {
      throw KeystoreError(KeystoreErrc::Inconsistent, "key count differs from private section");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      auto id = Digest::from_bytes(r.raw(Digest::kSize));
      auto it = t.keys_.find(id);
      if (it == t.keys_.end() || it->second.pair.public_key.id() != id) {
        throw KeystoreError(KeystoreErrc::Inconsistent, "key " + id.hex() + " does not match");
      }
      it->second.pair.private_key = crypto::PrivateKey::decode(r.bytes());
    }
    r.expect_end();
    return 0;
  });

  if (t.storage_key_id_ && !t.keys_.contains(*t.storage_key_id_)) {
    throw KeystoreError(KeystoreErrc::Inconsistent, "storage key missing");
  }
  return t;
}

}  // namespace pushsim::tpm

namespace pushsim::pca {

using namespace pushsim::keystore;

nlohmann::ordered_json PcaPersistence::to_json(const PrivacyCa& ca, std::string_view passphrase,
                                               crypto::Rng& rng) {
  ordered_json doc;
  doc["format"] = kPcaFormat;
  Bytes pub = ca.key_.public_key.encode();
  doc["public"] = to_hex(pub);
  auto& nonces = doc["outstanding_nonces"] = ordered_json::array();
  for (const auto& n : ca.outstanding_) nonces.push_back(to_hex(n));
  auto& ledger = doc["ledger"] = ordered_json::array();
  for (const auto& e : ca.ledger_) {
    ordered_json j;
    j["kind"] = e.kind;
    j["record"] = to_hex(e.record);
    ledger.push_back(j);
  }
  doc["private"] = seal_private(ca.key_.private_key.encode(), pub, passphrase, rng);
  return doc;
}

PrivacyCa PcaPersistence::from_json(const nlohmann::json& doc, std::string_view passphrase) {
  expect_format(doc, kPcaFormat);
  return guarded([&] {
    crypto::KeyPair key;
    Bytes pub = hex_field(doc, "public");
    key.public_key = crypto::PublicKey::decode(pub);
    key.key_id = key.public_key.id();
    key.private_key = crypto::PrivateKey::decode(open_private(doc.at("private"), pub, passphrase));
    PrivacyCa ca(std::move(key));
    for (const auto& n : doc.at("outstanding_nonces")) {
      auto b = from_hex(n.get<std::string>());
      if (b.size() != tpm::kNonceSize) bad_format("bad nonce size");
      tpm::Nonce nonce{};
      std::copy(b.begin(), b.end(), nonce.begin());
      ca.outstanding_.insert(nonce);
    }
    for (const auto& j : doc.at("ledger")) {
      ca.ledger_.push_back({j.at("kind").get<std::string>(), hex_field(j, "record")});
    }
    return ca;
  });
}

}  // namespace pushsim::pca

namespace pushsim::keystore {

std::string export_tpm(const tpm::Tpm& t, std::string_view passphrase, crypto::Rng& rng) {
  return tpm::TpmPersistence::to_json(t, passphrase, rng).dump(2) + "\n";
}

tpm::Tpm import_tpm(std::string_view document, std::string_view passphrase) {
  return tpm::TpmPersistence::from_json(parse(document), passphrase);
}

std::string export_pca(const pca::PrivacyCa& ca, std::string_view passphrase, crypto::Rng& rng) {
  return pca::PcaPersistence::to_json(ca, passphrase, rng).dump(2) + "\n";
}

pca::PrivacyCa import_pca(std::string_view document, std::string_view passphrase) {
  return pca::PcaPersistence::from_json(parse(document), passphrase);
}

std::string tpm_file_name(const tpm::Tpm& t) { return "tpm-" + t.id().hex() + ".json"; }

std::filesystem::path write_document(const std::filesystem::path& dir, const std::string& name,
                                     const std::string& document) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw KeystoreError(KeystoreErrc::Io, "cannot create " + dir.string() + ": " + ec.message());
  auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << document;
  if (!out) throw KeystoreError(KeystoreErrc::Io, "cannot write " + path.string());
  return path;
}

std::string read_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KeystoreError(KeystoreErrc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pushsim::keystore

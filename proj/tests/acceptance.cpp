// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "pushsim/keystore.hpp"
#include "pushsim/runner.hpp"

using namespace pushsim;
using pushsim::testing::manufacturer;
using pushsim::testing::owned_tpm;
using pushsim::testing::owner_auth;
using pushsim::testing::seed_of;

namespace {

// Latencies are sums of small integers in binary floating point: exact.
constexpr double kLatencyTolerance = 0.0;
constexpr double kAc1WallClockLimitSeconds = 1.0;
constexpr int kConfidentialitySeeds = 100;
constexpr int kAdversarialEnrollments = 100;
constexpr int kCoherenceSequences = 1000;

bool same(double a, double b) { return std::fabs(a - b) <= kLatencyTolerance; }

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

double charge_total(const cli::RunReport& r, const std::string& label) {
  double s = 0;
  for (const auto& c : r.charges) {
    if (c.label == label) s += c.seconds;
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string ac1() {
  auto start = std::chrono::steady_clock::now();
  cli::RunConfig c;
  c.fresh_aik_per_push = true;
  auto r = cli::run(c);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double attest = charge_total(r, "remote_attestation");
  double aik = charge_total(r, "aik_generation");
  require(r.outcomes.size() == 1 && r.outcomes[0].kind == protocol::OutcomeKind::Delivered,
          "push not delivered: " + r.outcomes.at(0).str());
  require(same(r.total_latency, 30.0), "total " + fmt(r.total_latency) + " s, want 30");
  require(same(attest, 8.0), "attestation " + fmt(attest) + " s, want 8");
  require(same(aik + attest, 15.0), "aik + attestation " + fmt(aik + attest) + " s, want 15");
  require(wall < kAc1WallClockLimitSeconds, "wall clock " + fmt(wall) + " s");
  return "total 30 s, attestation 8 s, aik+attestation 15 s, wall " + fmt(wall) + " s";
}

std::string ac2() {
  cli::RunConfig s1;
  s1.messages = 5;
  cli::RunConfig s2 = s1;
  s2.scenario = 2;
  auto a = cli::run(s1);
  auto b = cli::run(s2);
  auto rows = cli::compare(a, b);
  std::optional<cli::ComparisonRow> per_push;
  for (const auto& row : rows) {
    if (row.metric == "per_push_latency") per_push = row;
  }
  require(per_push.has_value(), "compare has no per_push_latency row");
  double s1_push = std::stod(per_push->a), s2_push = std::stod(per_push->b);
  require(s2_push < s1_push, "scenario 2 " + per_push->b + " s not below " + per_push->a + " s");
  for (const auto& c : b.charges) {
    bool heavy = c.label == "remote_attestation" || c.label == "aik_generation" ||
                 c.label == "pca_roundtrip";
    require(!(c.phase == "push" && heavy), "scenario 2 push phase charges " + c.label);
  }
  return "per push " + per_push->b + " s vs " + per_push->a + " s";
}

std::string ac3() {
  cli::RunConfig single;
  auto one = cli::run(single);
  cli::RunConfig bulk;
  bulk.messages = 10;
  bulk.bulk = true;
  auto r = cli::run(bulk);
  auto push_count = [&](const std::string& label) {
    return std::count_if(r.charges.begin(), r.charges.end(),
                         [&](const auto& c) { return c.phase == "push" && c.label == label; });
  };
  require(push_count("channel_setup") == 1, "channel_setup charged " +
                                                std::to_string(push_count("channel_setup")));
  require(push_count("remote_attestation") == 1,
          "remote_attestation charged " + std::to_string(push_count("remote_attestation")));
  double single_total = one.push_seconds();
  require(r.push_seconds() < 10 * single_total,
          fmt(r.push_seconds()) + " s not below " + fmt(10 * single_total) + " s");
  return "bulk 10 = " + fmt(r.push_seconds()) + " s vs 10 x " + fmt(single_total) + " s";
}

std::string ac4() {
  int runs = 0;
  for (int scenario : {1, 2}) {
    for (int seed = 1; seed <= kConfidentialitySeeds; ++seed) {
      cli::RunConfig c;
      c.scenario = scenario;
      c.seed = static_cast<std::uint64_t>(seed);
      c.messages = 2;
      auto r = cli::run(c);
      require(r.markers.at(0).size() == 32, "marker is not 32 bytes");
      require(r.noc.marker_hits.empty(), "marker hit, scenario " + std::to_string(scenario) +
                                             " seed " + std::to_string(seed));
      // Second route: scan the dump as the checker would see it.
      std::vector<net::TranscriptRecord> records;
      for (const auto& e : r.transcript) records.push_back(net::to_record(e));
      std::vector<net::DumpRecord> dump;
      for (const auto& e : r.observer.captured) {
        dump.push_back({e.seq, e.from, e.to, e.msg_type, e.payload});
      }
      auto suite = cli::recompute_checks(records, dump, c.topology, r.markers);
      require(suite.at("e2e_confidentiality").pass, "recomputed scan found the marker");
      require(!r.observer.captured.empty(), "nothing relayed");
      ++runs;
    }
  }
  return std::to_string(runs) + " runs, 0 marker hits";
}

std::string ac5() {
  std::vector<std::uint32_t> selection;
  for (std::uint32_t i = 0; i < tpm::kPcrCount; ++i) selection.push_back(i);
  int locked = 0;
  for (int scenario : {1, 2}) {
    for (auto pcr : selection) {
      cli::RunConfig c;
      c.scenario = scenario;
      c.messages = 1;
      c.seal_selection = selection;
      c.tamper_after = 1;
      c.tamper_pcr = pcr;
      auto r = cli::run(c);
      require(r.outcomes.at(0).kind == protocol::OutcomeKind::Delivered,
              "delivery before tamper failed: " + r.outcomes[0].str());
      require(!r.open_attempts.empty(), "no open attempt after tamper");
      for (const auto& a : r.open_attempts) {
        require(!a.ok && a.error == tpm::TpmErrc::PcrMismatch,
                "scenario " + std::to_string(scenario) + " pcr " + std::to_string(pcr) +
                    " not locked with PcrMismatch");
        ++locked;
      }
    }
  }
  return "24 PCRs x 2 scenarios, " + std::to_string(locked) + " opens refused";
}

// Device restored from a key store document whose log was edited.
struct VerifierBench {
  net::Network net{net::Topology::Decentralised, net::CostTable{}};
  protocol::Pki pki{"pca", pca::PrivacyCa(crypto::keygen(seed_of(800), crypto::KeyRole::Authority)),
                    manufacturer().public_key, crypto::Rng(8)};
  protocol::SyncServerActor server;
  protocol::AikMaterial aik;
  nlohmann::json document;

  static std::vector<protocol::BootComponent> chain() {
    auto c = protocol::standard_boot_chain();
    c.push_back({12, "vpn-plugin", to_bytes("vpn plugin 0.9")});
    return c;
  }

  static protocol::ReferenceMeasurementDb db() {
    auto d = protocol::standard_reference_db();
    for (const auto& c : chain()) d.allow(c.name, crypto::hash(c.code));
    return d;
  }

  VerifierBench()
      : server("sync-server", pki.ca.public_key(), db(), crypto::Rng(9)) {
    net.add_actor("sync-server");
    net.add_actor("device-1");
    net.add_actor("pca");
    protocol::DeviceActor device("device-1", "user-1", owned_tpm(801), owner_auth(),
                                 crypto::Rng(10));
    device.boot(chain());
    protocol::enroll_aik(device, pki, net);
    aik = *device.aik;
    crypto::Rng rng(11);
    document = nlohmann::json::parse(keystore::export_tpm(device.tpm(), "bench", rng));
  }

  protocol::Verdict attest(const nlohmann::json& doc) {
    protocol::DeviceActor device("device-1", "user-1", keystore::import_tpm(doc.dump(), "bench"),
                                 owner_auth(), crypto::Rng(12));
    device.aik = aik;
    auto ch = protocol::establish_secure_channel(server, device, net);
    return protocol::attest_device(server, device, net, ch);
  }
};

std::string ac6() {
  VerifierBench bench;
  const auto& log = bench.document["log"];
  require(log.size() == 5, "log holds " + std::to_string(log.size()) + " events");
  require(bench.attest(bench.document).trusted, "honest log not trusted");

  int mutations = 0;
  auto expect_untrusted = [&](nlohmann::json doc, const std::string& what) {
    auto v = bench.attest(doc);
    require(!v.trusted, what + " accepted");
    ++mutations;
  };
  for (std::size_t k = 0; k < log.size(); ++k) {
    auto doc = bench.document;
    doc["log"].erase(k);
    expect_untrusted(doc, "deletion of event " + std::to_string(k + 1));
  }
  for (std::size_t k = 0; k + 1 < log.size(); ++k) {
    auto doc = bench.document;
    std::swap(doc["log"][k], doc["log"][k + 1]);
    expect_untrusted(doc, "swap of events " + std::to_string(k + 1));
  }
  for (std::size_t k = 0; k < log.size(); ++k) {
    auto doc = bench.document;
    auto d = crypto::Digest::from_hex(doc["log"][k]["code_digest"].get<std::string>());
    auto bytes = d.bytes();
    bytes[0] ^= 0x01;
    doc["log"][k]["code_digest"] = crypto::Digest(bytes).hex();
    expect_untrusted(doc, "digest flip of event " + std::to_string(k + 1));
  }
  return "honest Trusted, " + std::to_string(mutations) + " mutations Untrusted";
}

// Replay with OpenSSL's SHA-256, independent of the library's hash.
std::array<std::array<std::uint8_t, 32>, tpm::kPcrCount> oracle_replay(
    const tpm::MeasurementLog& log) {
  std::array<std::array<std::uint8_t, 32>, tpm::kPcrCount> bank{};
  for (const auto& e : log.events) {
    std::uint8_t buf[64];
    std::copy(bank[e.pcr_index].begin(), bank[e.pcr_index].end(), buf);
    std::copy(e.code_digest.bytes().begin(), e.code_digest.bytes().end(), buf + 32);
    unsigned int len = 0;
    EVP_Digest(buf, sizeof buf, bank[e.pcr_index].data(), &len, EVP_sha256(), nullptr);
  }
  return bank;
}

std::string ac7() {
  crypto::Rng rng(7000);
  std::size_t events = 0;
  for (int s = 0; s < kCoherenceSequences; ++s) {
    auto t = owned_tpm(10000 + static_cast<std::uint64_t>(s));
    auto n = 1 + rng.next_u64() % 16;
    for (std::uint64_t k = 0; k < n; ++k) {
      auto pcr = static_cast<std::uint32_t>(rng.next_u64() % tpm::kPcrCount);
      t.measure(pcr, "c" + std::to_string(k), rng.bytes(1 + rng.next_u64() % 64));
    }
    events += n;
    require(tpm::replay(t.log()) == t.pcrs(), "library replay differs, sequence " + std::to_string(s));
    auto oracle = oracle_replay(t.log());
    for (std::uint32_t i = 0; i < tpm::kPcrCount; ++i) {
      require(oracle[i] == t.pcrs().read(i).bytes(),
              "oracle replay differs at PCR " + std::to_string(i));
    }
  }
  return std::to_string(kCoherenceSequences) + " sequences, " + std::to_string(events) +
         " events, both replays bit-exact";
}

std::string ac8() {
  for (int scenario : {1, 2}) {
    cli::RunConfig c;
    c.scenario = scenario;
    c.messages = 3;
    c.noc_down_after = 0;
    auto central = cli::run(c);
    for (const auto& o : central.outcomes) {
      require(o.str() == "Failed(Unreachable)", "centralised outcome " + o.str());
    }
    c.topology = net::Topology::Decentralised;
    auto direct = cli::run(c);
    for (const auto& o : direct.outcomes) {
      require(o.kind == protocol::OutcomeKind::Delivered, "decentralised outcome " + o.str());
    }
  }
  return "centralised Failed(Unreachable), decentralised Delivered, both scenarios";
}

std::string ac9() {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "pushsim-acceptance-ac9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int configs = 0;
  for (int scenario : {1, 2}) {
    for (bool bulk : {false, true}) {
      cli::RunConfig c;
      c.scenario = scenario;
      c.bulk = bulk;
      c.messages = 4;
      c.tamper_after = 3;
      c.seed = 99;
      c.transcript_path = (dir / "a.jsonl").string();
      cli::run_and_write(c);
      c.transcript_path = (dir / "b.jsonl").string();
      cli::run_and_write(c);
      auto a = slurp(dir / "a.jsonl");
      require(!a.empty() && a == slurp(dir / "b.jsonl"),
              "transcripts differ, scenario " + std::to_string(scenario));
      ++configs;
    }
  }
  fs::remove_all(dir);
  return std::to_string(configs) + " configurations byte-identical";
}

std::string ac10() {
  pca::PrivacyCa ca(crypto::keygen(seed_of(900), crypto::KeyRole::Authority));
  auto honest = owned_tpm(901);
  crypto::Rng rng(902);
  int verifying = 0;
  for (int i = 0; i < kAdversarialEnrollments; ++i) {
    auto adversary = crypto::keygen(rng.seed32(), crypto::KeyRole::Authority);
    auto aik = crypto::keygen(rng.seed32(), crypto::KeyRole::AttestationIdentity);
    tpm::EndorsementCredential ekc;
    ekc.ek_public = crypto::keygen(rng.seed32(), crypto::KeyRole::Endorsement).public_key;
    if (i % 3 == 0) ekc.signature = crypto::sign(adversary.private_key, ekc.ek_public.encode());
    else if (i % 3 == 1) ekc.signature = rng.bytes(64);
    else ekc.signature = honest.ekc().signature;
    try {
      auto cred = ca.enroll_aik(aik.public_key, ekc, manufacturer().public_key, 0);
      if (pca::verify_aik_credential(ca.public_key(), cred)) ++verifying;
    } catch (const pca::PcaError& e) {
      require(e.code() == pca::PcaErrc::BadEkc, "unexpected " + std::string(to_string(e.code())));
    }
  }
  require(verifying == 0, std::to_string(verifying) + " adversarial credentials verify");

  // Certification fixtures.
  auto t = owned_tpm(903);
  t.measure(10, "email-app", to_bytes("client"));
  auto aik = t.create_aik(owner_auth());
  auto cred = ca.enroll_aik(aik.public_key, t.ekc(), manufacturer().public_key, 0);
  tpm::PcrPolicy policy;
  policy.required_values[10] = t.pcrs().read(10);
  auto bk = t.create_binding_key(owner_auth(), policy);
  auto expect = [&](pca::PcaErrc want, const std::string& name, const std::function<void()>& f) {
    try {
      f();
    } catch (const pca::PcaError& e) {
      require(e.code() == want, name + " gave " + std::string(to_string(e.code())));
      return;
    }
    throw Failure(name + " was accepted");
  };
  int fixtures = 0;

  auto n1 = ca.issue_nonce(rng);
  auto q1 = t.quote(aik.key_id, n1, policy.selection());
  ca.certify_binding_key(bk.public_key, policy, cred, q1, n1, 0);
  expect(pca::PcaErrc::StaleNonce, "replayed nonce",
         [&] { ca.certify_binding_key(bk.public_key, policy, cred, q1, n1, 0); });
  ++fixtures;

  tpm::Nonce own{};
  own.fill(0x33);
  expect(pca::PcaErrc::StaleNonce, "unissued nonce", [&] {
    ca.certify_binding_key(bk.public_key, policy, cred,
                           t.quote(aik.key_id, own, policy.selection()), own, 0);
  });
  ++fixtures;

  auto n2 = ca.issue_nonce(rng);
  auto other = n2;
  other[0] ^= 1;
  expect(pca::PcaErrc::StaleNonce, "quote over another nonce", [&] {
    ca.certify_binding_key(bk.public_key, policy, cred,
                           t.quote(aik.key_id, other, policy.selection()), n2, 0);
  });
  ++fixtures;

  auto n3 = ca.issue_nonce(rng);
  expect(pca::PcaErrc::PolicyMismatch, "selection differs", [&] {
    ca.certify_binding_key(bk.public_key, policy, cred, t.quote(aik.key_id, n3, {0, 10}), n3, 0);
  });
  ++fixtures;

  t.extend(10, crypto::hash(std::string_view("state change")));
  auto n4 = ca.issue_nonce(rng);
  expect(pca::PcaErrc::PolicyMismatch, "register changed", [&] {
    ca.certify_binding_key(bk.public_key, policy, cred,
                           t.quote(aik.key_id, n4, policy.selection()), n4, 0);
  });
  ++fixtures;

  return std::to_string(kAdversarialEnrollments) + " adversarial enrollments, 0 verify; " +
         std::to_string(fixtures) + " fixtures rejected";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"AC1 latency arithmetic", ac1},      {"AC2 steady-state advantage", ac2},
      {"AC3 bulk amortisation", ac3},       {"AC4 end-to-end confidentiality", ac4},
      {"AC5 state-change lockout", ac5},    {"AC6 verifier soundness", ac6},
      {"AC7 log/PCR coherence", ac7},       {"AC8 availability model", ac8},
      {"AC9 determinism", ac9},             {"AC10 credential soundness", ac10},
  };
  int failed = 0;
  for (const auto& [name, body] : criteria) {
    try {
      auto detail = body();
      std::cout << "[PASS] " << name << ": " << detail << '\n';
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "[FAIL] " << name << ": " << e.what() << '\n';
    }
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}

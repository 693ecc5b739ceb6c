#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pushsim/runner.hpp"

using namespace pushsim;
using namespace pushsim::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pushsim-runner-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

RunConfig with_paths(RunConfig c, const fs::path& dir) {
  c.transcript_path = (dir / "transcript.jsonl").string();
  c.report_path = (dir / "report.json").string();
  c.noc_dump_path = (dir / "noc.jsonl").string();
  return c;
}

std::vector<std::string> outcome_strings(const RunReport& r) {
  std::vector<std::string> out;
  for (const auto& o : r.outcomes) out.push_back(o.str());
  return out;
}

std::vector<net::TranscriptRecord> records(const RunReport& r) {
  std::vector<net::TranscriptRecord> out;
  for (const auto& e : r.transcript) out.push_back(net::to_record(e));
  return out;
}

std::vector<net::DumpRecord> dump_of(const RunReport& r) {
  std::vector<net::DumpRecord> out;
  for (const auto& e : r.observer.captured) out.push_back({e.seq, e.from, e.to, e.msg_type, e.payload});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultsFromEmptyObject) {
  auto c = parse_config("{}");
  EXPECT_EQ(c.scenario, 1);
  EXPECT_EQ(c.topology, net::Topology::Centralised);
  EXPECT_EQ(c.messages, 1u);
  EXPECT_TRUE(c.independent_encryption);
  EXPECT_EQ(c.tamper_pcr, 10u);
  EXPECT_EQ(c.seal_selection, std::vector<std::uint32_t>{10});
}

TEST(Config, ParsesEveryField) {
  auto c = parse_config(R"({
    "scenario": 2, "topology": "decentralised", "messages": 5, "bulk": true,
    "independent_encryption": false, "fresh_aik_per_push": true, "aik_prefetch": true,
    "tamper_after": 3, "tamper_pcr": 8, "noc_down_after": null,
    "noc_malicious_markers": ["CONFIDENTIAL-1"], "cost_overrides": {"seal_op": 1.5},
    "seed": 42, "key_scheme": "rsa-1024", "seal_selection": [8, 10],
    "extra_boot_components": [{"pcr": 12, "name": "plugin", "code": "v1"}],
    "whitelist": [{"name": "plugin", "code": "v1"}], "pull_mode": true,
    "transcript": "t.jsonl", "report": "r.json", "noc_dump": "d.jsonl",
    "keystore": "ks", "keystore_passphrase": "secret"})");
  EXPECT_EQ(c.scenario, 2);
  EXPECT_EQ(c.topology, net::Topology::Decentralised);
  EXPECT_EQ(c.tamper_after, std::optional<std::uint64_t>(3));
  EXPECT_FALSE(c.noc_down_after.has_value());
  EXPECT_EQ(c.costs().seal_op, 1.5);
  EXPECT_EQ(c.key_scheme, crypto::KeyScheme::Rsa1024);
  ASSERT_EQ(c.extra_boot_components.size(), 1u);
  EXPECT_EQ(c.extra_boot_components[0].pcr, 12u);
  EXPECT_EQ(c.keystore_passphrase, "secret");

  auto echoed = config_json(c);
  EXPECT_EQ(echoed.find("secret"), std::string::npos);
  EXPECT_EQ(config_json(parse_config(echoed)), echoed);
}

TEST(Config, RejectsBadInput) {
  const char* bad[] = {
      "[1]",
      "not json",
      R"({"colour": "blue"})",
      R"({"scenario": 3})",
      R"({"scenario": "one"})",
      R"({"messages": -1})",
      R"({"topology": "mesh"})",
      R"({"messages": 2, "tamper_after": 3})",
      R"({"messages": 2, "noc_down_after": 5})",
      R"({"tamper_pcr": 24})",
      R"({"noc_malicious_markers": ["short"]})",
      R"({"cost_overrides": {"warp": 1}})",
      R"({"cost_overrides": {"seal_op": -1}})",
      R"({"key_scheme": "dsa"})",
      R"({"seal_selection": []})",
      R"({"seal_selection": [30]})",
      R"({"extra_boot_components": [{"pcr": 40, "name": "x", "code": "y"}]})",
      R"({"whitelist": [{"code": "y"}]})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(parse_config(text), ConfigError) << text;
  }
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/pushsim.json"), IoError);
}

// ---------------------------------------------------------------------------
// Runs

TEST(Run, Scenario1FreshAik) {
  RunConfig c;
  c.fresh_aik_per_push = true;
  auto r = run(c);
  EXPECT_EQ(outcome_strings(r), std::vector<std::string>{"Delivered"});
  EXPECT_DOUBLE_EQ(r.provisioning_latency, 0.0);
  EXPECT_DOUBLE_EQ(r.total_latency, 30.0);
  EXPECT_DOUBLE_EQ(r.per_push_latency, 30.0);
  EXPECT_TRUE(r.all_pass());
}

TEST(Run, Scenario1SteadyState) {
  RunConfig c;
  c.messages = 3;
  auto r = run(c);
  EXPECT_DOUBLE_EQ(r.provisioning_latency, 14.0);
  EXPECT_DOUBLE_EQ(r.per_push_latency, 16.0);
  EXPECT_DOUBLE_EQ(r.total_latency, 48.0);
  EXPECT_EQ(r.charge_count("remote_attestation"), 3u);
  EXPECT_TRUE(r.all_pass());
}

TEST(Run, Scenario1PrefetchedFreshAiks) {
  RunConfig c;
  c.messages = 2;
  c.fresh_aik_per_push = true;
  c.aik_prefetch = true;
  auto r = run(c);
  EXPECT_DOUBLE_EQ(r.provisioning_latency, 14.0);
  EXPECT_DOUBLE_EQ(r.per_push_latency, 23.0);
}

TEST(Run, Scenario2WithTamper) {
  RunConfig c;
  c.scenario = 2;
  c.messages = 4;
  c.tamper_after = 2;
  auto r = run(c);
  std::vector<std::string> expected = {"Delivered", "Delivered", "Delivered-but-Locked",
                                       "Delivered-but-Locked"};
  EXPECT_EQ(outcome_strings(r), expected);
  EXPECT_DOUBLE_EQ(r.provisioning_latency, 36.0);
  EXPECT_DOUBLE_EQ(r.per_push_latency, 0.0);
  EXPECT_TRUE(r.all_pass());
  EXPECT_FALSE(r.open_attempts.empty());
  for (const auto& a : r.open_attempts) EXPECT_FALSE(a.ok);
}

TEST(Run, Scenario1TamperRefusesLaterPushes) {
  RunConfig c;
  c.messages = 3;
  c.tamper_after = 1;
  auto r = run(c);
  std::vector<std::string> expected = {"Delivered", "Refused(LogReplayMismatch)",
                                       "Refused(LogReplayMismatch)"};
  EXPECT_EQ(outcome_strings(r), expected);
  EXPECT_TRUE(r.all_pass());
}

TEST(Run, BulkAmortisesAttestation) {
  RunConfig c;
  c.messages = 10;
  c.bulk = true;
  auto r = run(c);
  EXPECT_EQ(r.charge_count("channel_setup"), 1u);
  EXPECT_EQ(r.charge_count("remote_attestation"), 1u);
  EXPECT_DOUBLE_EQ(r.push_seconds(), 34.0);
  EXPECT_EQ(r.outcomes.size(), 10u);
}

TEST(Run, BulkCutsBatchesAtFaults) {
  RunConfig c;
  c.messages = 6;
  c.bulk = true;
  c.tamper_after = 2;
  c.noc_down_after = 4;
  auto r = run(c);
  std::vector<std::string> expected = {
      "Delivered",           "Delivered",          "Refused(LogReplayMismatch)",
      "Refused(LogReplayMismatch)", "Failed(Unreachable)", "Failed(Unreachable)"};
  EXPECT_EQ(outcome_strings(r), expected);
}

TEST(Run, NocOutageDependsOnTopology) {
  RunConfig c;
  c.messages = 2;
  c.noc_down_after = 0;
  auto central = run(c);
  EXPECT_EQ(outcome_strings(central),
            (std::vector<std::string>{"Failed(Unreachable)", "Failed(Unreachable)"}));
  c.topology = net::Topology::Decentralised;
  auto direct = run(c);
  EXPECT_EQ(outcome_strings(direct), (std::vector<std::string>{"Delivered", "Delivered"}));
  ASSERT_FALSE(direct.events.empty());
  EXPECT_NE(direct.events[0].find("ignored"), std::string::npos);
}

TEST(Run, RogueComponentRefusedUnlessWhitelisted) {
  RunConfig c;
  c.extra_boot_components = {{12, "plugin", "unsigned build"}};
  auto refused = run(c);
  EXPECT_EQ(outcome_strings(refused), std::vector<std::string>{"Refused(UnknownMeasurement)"});
  EXPECT_TRUE(refused.all_pass());
  c.whitelist = {{0, "plugin", "unsigned build"}};
  EXPECT_EQ(outcome_strings(run(c)), std::vector<std::string>{"Delivered"});
}

TEST(Run, PullModeMatchesPushMode) {
  RunConfig c;
  c.messages = 3;
  auto pushed = run(c);
  c.pull_mode = true;
  auto pulled = run(c);
  ASSERT_EQ(pushed.transcript.size(), pulled.transcript.size());
  for (std::size_t i = 0; i < pushed.transcript.size(); ++i) {
    EXPECT_EQ(net::to_record(pushed.transcript[i]), net::to_record(pulled.transcript[i]));
  }
}

TEST(Run, Rsa1024SchemeRuns) {
  RunConfig c;
  c.key_scheme = crypto::KeyScheme::Rsa1024;
  c.scenario = 2;
  c.messages = 2;
  auto r = run(c);
  EXPECT_EQ(outcome_strings(r), (std::vector<std::string>{"Delivered", "Delivered"}));
  EXPECT_TRUE(r.all_pass());
}

TEST(Run, ZeroMessages) {
  RunConfig c;
  c.messages = 0;
  auto r = run(c);
  EXPECT_TRUE(r.outcomes.empty());
  EXPECT_EQ(r.per_push_latency, 0.0);
  EXPECT_TRUE(r.all_pass());
}

TEST(Run, MarkersAppearInPayloadButNotAtNoc) {
  RunConfig c;
  c.scenario = 2;
  c.messages = 2;
  c.noc_malicious_markers = {"CONFIDENTIAL-ALPHA"};
  auto r = run(c);
  ASSERT_EQ(r.markers.size(), 2u);
  EXPECT_EQ(r.markers[0].size(), 32u);
  EXPECT_TRUE(r.noc.marker_hits.empty());
  EXPECT_TRUE(r.checks.at("e2e_confidentiality").pass);
}

// ---------------------------------------------------------------------------
// Recomputation

TEST(Recompute, AgreesWithInMemoryChecks) {
  for (int scenario : {1, 2}) {
    for (auto topology : {net::Topology::Centralised, net::Topology::Decentralised}) {
      RunConfig c;
      c.scenario = scenario;
      c.topology = topology;
      c.messages = 4;
      c.tamper_after = 2;
      auto r = run(c);
      auto suite = recompute_checks(records(r), dump_of(r), topology, r.markers);
      for (const auto& name : kCheckNames) {
        EXPECT_EQ(suite.at(name).pass, r.checks.at(name).pass) << name;
        EXPECT_TRUE(suite.at(name).pass) << name << " " << suite.at(name).detail;
      }
    }
  }
}

TEST(Recompute, PlantedMarkerFailsConfidentiality) {
  RunConfig c;
  c.scenario = 2;
  auto r = run(c);
  auto transcript = records(r);
  auto dump = dump_of(r);
  for (auto& d : dump) {
    if (d.msg_type != "s2.step6.data") continue;
    d.payload.insert(d.payload.end(), r.markers[0].begin(), r.markers[0].end());
    for (auto& t : transcript) {
      if (t.seq == d.seq) t.payload_hex_digest = crypto::hash(d.payload).hex();
    }
  }
  auto suite = recompute_checks(transcript, dump, c.topology, r.markers);
  EXPECT_FALSE(suite.at("e2e_confidentiality").pass);
  EXPECT_FALSE(suite.at("e2e_confidentiality").evidence.empty());
}

TEST(Recompute, DumpNotMatchingTranscriptIsParseError) {
  RunConfig c;
  auto r = run(c);
  auto dump = dump_of(r);
  dump[0].payload.push_back(0);
  EXPECT_THROW(recompute_checks(records(r), dump, c.topology, r.markers), ParseError);
  dump.pop_back();
  EXPECT_THROW(recompute_checks(records(r), dump, c.topology, r.markers), ParseError);
  EXPECT_THROW(recompute_checks(records(r), std::nullopt, c.topology, r.markers), ParseError);
}

TEST(Recompute, DataBeforeVerdictFailsGating) {
  RunConfig c;
  auto r = run(c);
  auto transcript = records(r);
  auto dump = dump_of(r);
  std::erase_if(transcript, [](const auto& t) { return t.msg_type == "s1.step3.verdict_trusted"; });
  std::erase_if(dump, [](const auto& d) { return d.msg_type == "s1.step3.verdict_trusted"; });
  auto suite = recompute_checks(transcript, dump, c.topology, r.markers);
  EXPECT_FALSE(suite.at("attestation_gating").pass);
}

TEST(Recompute, OpenAfterTamperFailsLockout) {
  RunConfig c;
  c.scenario = 2;
  c.messages = 2;
  c.tamper_after = 1;
  auto r = run(c);
  auto transcript = records(r);
  for (auto& t : transcript) {
    if (t.msg_type == "local.open_pcr_mismatch") t.msg_type = "local.open_ok";
  }
  auto suite = recompute_checks(transcript, dump_of(r), c.topology, r.markers);
  EXPECT_FALSE(suite.at("lockout_after_tamper").pass);
}

TEST(Recompute, RelayInDecentralisedRunFailsTraffic) {
  RunConfig c;
  c.topology = net::Topology::Decentralised;
  auto r = run(c);
  auto transcript = records(r);
  transcript[0].via = "noc";
  auto suite = recompute_checks(transcript, std::nullopt, c.topology, r.markers);
  EXPECT_FALSE(suite.at("noc_traffic_analysis").pass);
}

// ---------------------------------------------------------------------------
// Artifacts on disk

TEST(Artifacts, CheckAgreesWithHonestRun) {
  auto dir = scratch("honest");
  auto c = with_paths(RunConfig{}, dir);
  c.scenario = 2;
  c.messages = 3;
  c.tamper_after = 2;
  c.keystore_path = (dir / "keys").string();
  run_and_write(c);
  auto result = check(c.transcript_path, c.report_path);
  EXPECT_TRUE(result.mismatches.empty());
  EXPECT_TRUE(result.all_pass());
  EXPECT_TRUE(fs::exists(dir / "keys" / "pca.json"));
  auto report = nlohmann::json::parse(slurp(c.report_path));
  EXPECT_EQ(report["format"], "pushsim-report/1");
  EXPECT_EQ(report["outcomes"].size(), 3u);
  fs::remove_all(dir);
}

TEST(Artifacts, FlippedReportVerdictIsMismatch) {
  auto dir = scratch("flipped");
  auto c = with_paths(RunConfig{}, dir);
  run_and_write(c);
  auto report = nlohmann::json::parse(slurp(c.report_path));
  report["checks"]["attestation_gating"]["pass"] = false;
  spit(c.report_path, report.dump());
  auto result = check(c.transcript_path, c.report_path);
  EXPECT_EQ(result.mismatches, std::vector<std::string>{"attestation_gating"});
  EXPECT_FALSE(result.all_pass());
  fs::remove_all(dir);
}

TEST(Artifacts, PlantedMarkerOnDiskIsMismatch) {
  auto dir = scratch("planted");
  auto c = with_paths(RunConfig{}, dir);
  c.scenario = 2;
  auto r = run_and_write(c);

  std::ifstream din(c.noc_dump_path);
  auto dump = net::read_noc_dump(din);
  din.close();
  std::ifstream tin(c.transcript_path);
  auto transcript = net::read_transcript(tin);
  tin.close();

  net::NocObserver planted;
  std::vector<net::Envelope> envelopes;
  for (const auto& t : transcript) {
    net::Envelope e{t.seq, t.sim_time, t.from, t.to, t.via, t.msg_type, {}, t.size};
    for (const auto& d : dump) {
      if (d.seq == t.seq) e.payload = d.payload;
    }
    if (e.msg_type == "s2.step6.data") {
      e.payload.insert(e.payload.end(), r.markers[0].begin(), r.markers[0].end());
    }
    if (e.via) planted.capture(e);
    envelopes.push_back(e);
  }
  std::ofstream tout(c.transcript_path, std::ios::trunc);
  net::write_transcript(tout, envelopes);
  tout.close();
  std::ofstream dout(c.noc_dump_path, std::ios::trunc);
  net::write_noc_dump(dout, planted);
  dout.close();

  auto result = check(c.transcript_path, c.report_path);
  EXPECT_FALSE(result.recomputed.at("e2e_confidentiality").pass);
  EXPECT_EQ(result.mismatches, std::vector<std::string>{"e2e_confidentiality"});
  fs::remove_all(dir);
}

TEST(Artifacts, MissingOrCorruptFiles) {
  auto dir = scratch("corrupt");
  auto c = with_paths(RunConfig{}, dir);
  run_and_write(c);
  EXPECT_THROW(check((dir / "absent.jsonl").string(), c.report_path), IoError);
  spit(dir / "bad.json", "{");
  EXPECT_THROW(check(c.transcript_path, (dir / "bad.json").string()), ParseError);
  spit(dir / "other.json", R"({"format": "something-else"})");
  EXPECT_THROW(check(c.transcript_path, (dir / "other.json").string()), ParseError);
  spit(c.transcript_path, "garbage\n");
  EXPECT_THROW(check(c.transcript_path, c.report_path), ParseError);
  fs::remove_all(dir);
}

TEST(Artifacts, SameSeedSameTranscriptBytes) {
  auto a = scratch("det-a");
  auto b = scratch("det-b");
  RunConfig c;
  c.scenario = 2;
  c.messages = 3;
  c.tamper_after = 1;
  run_and_write(with_paths(c, a));
  run_and_write(with_paths(c, b));
  EXPECT_EQ(slurp(a / "transcript.jsonl"), slurp(b / "transcript.jsonl"));
  c.seed = 2;
  run_and_write(with_paths(c, b));
  EXPECT_NE(slurp(a / "transcript.jsonl"), slurp(b / "transcript.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

// ---------------------------------------------------------------------------
// Comparison

TEST(Compare, Scenario2PushIsCheaper) {
  RunConfig s1;
  s1.messages = 3;
  RunConfig s2 = s1;
  s2.scenario = 2;
  auto a = run(s1);
  auto b = run(s2);
  auto rows = compare(a, b);
  auto row = [&](const std::string& metric) {
    for (const auto& r : rows) {
      if (r.metric == metric) return r;
    }
    return ComparisonRow{};
  };
  EXPECT_EQ(row("per_push_latency").a, "16");
  EXPECT_EQ(row("per_push_latency").b, "0");
  EXPECT_EQ(row("charge remote_attestation").a, "3 x / 24 s");
  EXPECT_EQ(row("charge remote_attestation").b, "1 x / 8 s");
  std::ostringstream out;
  print_comparison(out, rows);
  EXPECT_NE(out.str().find("per_push_latency"), std::string::npos);
}

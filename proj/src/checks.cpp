#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pushsim/runner.hpp"

namespace pushsim::cli {

namespace {

bool is_data(std::string_view msg_type) {
  return msg_type == "s1.step5.data" || msg_type == "s2.step6.data";
}

std::map<std::uint64_t, const net::TranscriptRecord*> index_by_seq(
    const std::vector<net::TranscriptRecord>& transcript) {
  std::map<std::uint64_t, const net::TranscriptRecord*> out;
  std::uint64_t last = 0;
  for (const auto& r : transcript) {
    if (r.seq <= last) throw ParseError("transcript seq not strictly increasing at " + std::to_string(r.seq));
    last = r.seq;
    out[r.seq] = &r;
  }
  return out;
}

CheckVerdict e2e_from_dump(const std::vector<net::TranscriptRecord>& transcript,
                           const std::optional<std::vector<net::DumpRecord>>& dump,
                           net::Topology topology, const std::vector<Bytes>& markers) {
  std::size_t relayed = std::count_if(transcript.begin(), transcript.end(),
                                      [](const auto& r) { return r.via.has_value(); });
  if (!dump) {
    if (topology == net::Topology::Centralised && relayed > 0) {
      throw ParseError("the confidentiality check needs the NOC dump of a centralised run");
    }
    return {true, {}, "no relayed traffic"};
  }

  auto by_seq = index_by_seq(transcript);
  if (dump->size() != relayed) {
    throw ParseError("NOC dump holds " + std::to_string(dump->size()) + " envelopes, transcript " +
                     std::to_string(relayed) + " relayed");
  }
  CheckVerdict v{true, {}, {}};
  std::set<std::uint64_t> hits;
  for (const auto& d : *dump) {
    auto it = by_seq.find(d.seq);
    if (it == by_seq.end() || !it->second->via || it->second->msg_type != d.msg_type ||
        it->second->payload_hex_digest != crypto::hash(d.payload).hex()) {
      throw ParseError("NOC dump entry " + std::to_string(d.seq) + " does not match the transcript");
    }
    for (const auto& m : markers) {
      if (!m.empty() && contains(d.payload, m)) hits.insert(d.seq);
    }
    if (is_data(d.msg_type)) v.evidence.push_back(d.seq);
  }
  if (!hits.empty()) return {false, {hits.begin(), hits.end()}, "marker visible to the NOC"};
  v.detail = std::to_string(dump->size()) + " relayed envelopes, no marker";
  return v;
}

CheckVerdict gating_from_transcript(const std::vector<net::TranscriptRecord>& transcript) {
  CheckVerdict v{true, {}, {}};
  std::vector<std::uint64_t> bad;
  std::size_t data = 0;
  // Scenario 1: per channel session, data only after a trusted verdict.
  std::optional<std::uint64_t> trusted_at;
  // Scenario 2: evidence, certificate and registration precede any data.
  bool attested = false, certified = false;
  std::optional<std::uint64_t> registered_at;
  for (const auto& r : transcript) {
    const auto& t = r.msg_type;
    if (t == "s1.step2.channel_hello") trusted_at.reset();
    else if (t == "s1.step3.verdict_trusted") trusted_at = r.seq;
    else if (t == "s1.step3.verdict_untrusted") trusted_at.reset();
    else if (t == "s2.step2.attest_evidence") attested = true;
    else if (t == "s2.step3.certificate") certified = attested;
    else if (t == "s2.step4.registered" && certified) registered_at = r.seq;

    std::optional<std::uint64_t> gate;
    if (t == "s1.step5.data") gate = trusted_at;
    else if (t == "s2.step6.data") gate = registered_at;
    else continue;
    ++data;
    if (gate) {
      v.evidence.push_back(*gate);
      v.evidence.push_back(r.seq);
    } else {
      bad.push_back(r.seq);
    }
  }
  if (!bad.empty()) return {false, bad, "content sent without a preceding trusted attestation"};
  v.detail = std::to_string(data) + " data envelopes, each after attestation";
  return v;
}

CheckVerdict lockout_from_transcript(const std::vector<net::TranscriptRecord>& transcript) {
  auto tamper = std::find_if(transcript.begin(), transcript.end(),
                             [](const auto& r) { return r.msg_type == "local.tamper"; });
  if (tamper == transcript.end()) return {true, {}, "no tamper scheduled"};
  CheckVerdict v{true, {tamper->seq}, {}};
  std::vector<std::uint64_t> bad;
  for (auto it = tamper; it != transcript.end(); ++it) {
    if (it->msg_type == "local.open_ok") bad.push_back(it->seq);
    else if (it->msg_type.starts_with("local.open_")) v.evidence.push_back(it->seq);
  }
  if (!bad.empty()) return {false, bad, "content readable after the platform state changed"};
  v.detail = std::to_string(v.evidence.size() - 1) + " open attempts after tamper, all refused";
  return v;
}

CheckVerdict traffic_from_transcript(const std::vector<net::TranscriptRecord>& transcript,
                                     net::Topology topology) {
  CheckVerdict v{true, {}, {}};
  std::set<std::pair<std::string, std::string>> pairs;
  std::size_t network = 0;
  for (const auto& r : transcript) {
    if (r.is_local()) {
      if (r.via) v.pass = false;
      continue;
    }
    ++network;
    if (topology == net::Topology::Centralised) {
      if (r.via != net::kNocId) v.pass = false;
      else {
        pairs.insert({r.from, r.to});
        v.evidence.push_back(r.seq);
      }
    } else if (r.via) {
      v.pass = false;
      v.evidence.push_back(r.seq);
    }
  }
  if (topology == net::Topology::Centralised) {
    if (network > 0 && pairs.empty()) v.pass = false;
    v.detail = std::to_string(pairs.size()) + " communicating pairs visible to the NOC";
  } else {
    v.detail = "no relay; the NOC observes nothing";
  }
  return v;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

template <typename F>
auto read_lines(const std::string& path, F&& reader) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  try {
    return reader(in);
  } catch (const CodecError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

CheckSuite recompute_checks(const std::vector<net::TranscriptRecord>& transcript,
                            const std::optional<std::vector<net::DumpRecord>>& noc_dump,
                            net::Topology topology, const std::vector<Bytes>& markers) {
  index_by_seq(transcript);
  CheckSuite out;
  out["e2e_confidentiality"] = e2e_from_dump(transcript, noc_dump, topology, markers);
  out["attestation_gating"] = gating_from_transcript(transcript);
  out["lockout_after_tamper"] = lockout_from_transcript(transcript);
  out["noc_traffic_analysis"] = traffic_from_transcript(transcript, topology);
  return out;
}

bool CheckResult::all_pass() const {
  return mismatches.empty() &&
         std::all_of(recomputed.begin(), recomputed.end(), [](const auto& kv) { return kv.second.pass; });
}

CheckResult check(const std::string& transcript_path, const std::string& report_path,
                  const std::string& noc_dump_path) {
  auto report = read_json(report_path);
  CheckResult result;
  net::Topology topology;
  std::vector<Bytes> markers;
  std::string dump_path = noc_dump_path;
  try {
    if (report.at("format").get<std::string>() != "pushsim-report/1") {
      throw ParseError(report_path + ": not a pushsim report");
    }
    topology = net::parse_topology(report.at("config").at("topology").get<std::string>());
    for (const auto& m : report.at("markers_hex")) markers.push_back(from_hex(m.get<std::string>()));
    if (dump_path.empty() && report.at("noc_dump").is_string()) {
      dump_path = report["noc_dump"].get<std::string>();
    }
    for (const auto& name : kCheckNames) {
      const auto& c = report.at("checks").at(name);
      result.reported[name] = {c.at("pass").get<bool>(),
                               c.at("evidence").get<std::vector<std::uint64_t>>(),
                               c.at("detail").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(report_path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(report_path + ": " + e.what());
  } catch (const CodecError& e) {
    throw ParseError(report_path + ": " + e.what());
  }

  auto transcript = read_lines(transcript_path, [](std::istream& in) { return net::read_transcript(in); });
  std::optional<std::vector<net::DumpRecord>> dump;
  if (!dump_path.empty()) {
    dump = read_lines(dump_path, [](std::istream& in) { return net::read_noc_dump(in); });
  }

  result.recomputed = recompute_checks(transcript, dump, topology, markers);
  for (const auto& name : kCheckNames) {
    if (result.recomputed.at(name).pass != result.reported.at(name).pass) {
      result.mismatches.push_back(name);
    }
  }
  return result;
}

}  // namespace pushsim::cli

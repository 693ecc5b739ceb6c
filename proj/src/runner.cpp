#include "pushsim/runner.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pushsim/keystore.hpp"

namespace pushsim::cli {

using nlohmann::ordered_json;
using protocol::Outcome;
using protocol::OutcomeKind;

namespace {

const net::ActorId kServer = "sync-server";
const net::ActorId kDevice = "device-1";
const std::string kUser = "user-1";

struct World {
  net::Network net;
  protocol::Pki pki;
  protocol::SyncServerActor server;
  protocol::DeviceActor device;
  protocol::DataSource source{"mail-source"};
  Bytes marker;
  crypto::Rng keystore_rng;
};

World build_world(const RunConfig& config) {
  crypto::Rng root(config.seed);
  auto manufacturer =
      crypto::keygen(root.fork("manufacturer").seed32(), crypto::KeyRole::Authority,
                     config.key_scheme);
  auto pca_key =
      crypto::keygen(root.fork("pca").seed32(), crypto::KeyRole::Authority, config.key_scheme);
  auto tpm = tpm::Tpm::manufacture(root.fork("tpm").seed32(), manufacturer.private_key,
                                   config.key_scheme);
  auto auth = root.fork("owner").bytes(20);
  tpm.take_ownership(auth);

  auto pca_public = pca_key.public_key;
  auto db = protocol::standard_reference_db();
  for (const auto& entry : config.whitelist) db.allow(entry.name, crypto::hash(entry.code));
  World w{net::Network(config.topology, config.costs()),
          protocol::Pki{"pca", pca::PrivacyCa(std::move(pca_key)), manufacturer.public_key,
                        root.fork("pca-nonces")},
          protocol::SyncServerActor(kServer, pca_public, std::move(db), root.fork("server")),
          protocol::DeviceActor(kDevice, kUser, std::move(tpm), auth, root.fork("device")),
          protocol::DataSource("mail-source"),
          root.fork("marker").bytes(32),
          root.fork("keystore")};
  w.net.add_actor(kServer);
  w.net.add_actor(kDevice);
  w.net.add_actor(w.pki.id);

  auto chain = protocol::standard_boot_chain();
  for (const auto& extra : config.extra_boot_components) {
    chain.push_back({extra.pcr, extra.name, to_bytes(extra.code)});
  }
  w.device.boot(chain);
  return w;
}

Bytes message_payload(std::uint64_t index, const RunConfig& config, const Bytes& marker) {
  Bytes out = to_bytes("message " + std::to_string(index) + " for " + kUser + "\n");
  out.insert(out.end(), marker.begin(), marker.end());
  for (const auto& m : config.noc_malicious_markers) {
    out.push_back('\n');
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

template <typename E>
Outcome failed_with(const E& e) {
  return {OutcomeKind::Failed, std::string(to_string(e.code()))};
}

bool is_data(std::string_view msg_type) {
  return msg_type == "s1.step5.data" || msg_type == "s2.step6.data";
}

struct RunState {
  std::vector<protocol::SessionTranscript> sessions;
  std::optional<std::uint64_t> registered_seq;
  std::optional<std::uint64_t> tamper_seq;
};

CheckVerdict e2e_in_memory(const RunReport& r) {
  CheckVerdict v;
  if (r.noc.marker_hits.empty()) {
    v.pass = true;
    for (const auto& e : r.observer.captured) {
      if (is_data(e.msg_type)) v.evidence.push_back(e.seq);
    }
    v.detail = std::to_string(r.observer.captured.size()) + " relayed envelopes, no marker";
  } else {
    std::set<std::uint64_t> seqs;
    for (const auto& h : r.noc.marker_hits) seqs.insert(h.seq);
    v.evidence.assign(seqs.begin(), seqs.end());
    v.detail = "marker visible to the NOC";
  }
  return v;
}

CheckVerdict gating_in_memory(const RunState& s) {
  CheckVerdict v{true, {}, {}};
  std::vector<std::uint64_t> bad;
  std::size_t data = 0;
  for (const auto& st : s.sessions) {
    std::optional<std::uint64_t> trusted_at;
    for (const auto& step : st.steps) {
      if (step.msg_type == "s1.step3.verdict_trusted") trusted_at = step.seq;
      if (step.msg_type == "s1.step3.verdict_untrusted") trusted_at.reset();
      if (step.msg_type == "s1.step5.data") {
        ++data;
        bool ok = trusted_at && *trusted_at < step.seq && st.verdict && st.verdict->trusted;
        if (ok) {
          v.evidence.push_back(*trusted_at);
          v.evidence.push_back(step.seq);
        } else {
          bad.push_back(step.seq);
        }
      }
      if (step.msg_type == "s2.step6.data") {
        ++data;
        if (s.registered_seq && *s.registered_seq < step.seq) {
          v.evidence.push_back(*s.registered_seq);
          v.evidence.push_back(step.seq);
        } else {
          bad.push_back(step.seq);
        }
      }
    }
  }
  if (!bad.empty()) {
    v = {false, bad, "content sent without a preceding trusted attestation"};
  } else {
    v.detail = std::to_string(data) + " data envelopes, each after attestation";
  }
  return v;
}

CheckVerdict lockout_in_memory(const RunReport& r, const RunState& s) {
  if (!s.tamper_seq) return {true, {}, "no tamper scheduled"};
  CheckVerdict v{true, {*s.tamper_seq}, {}};
  std::vector<std::uint64_t> bad;
  for (const auto& a : r.open_attempts) {
    if (a.ok) bad.push_back(a.seq);
    else v.evidence.push_back(a.seq);
  }
  for (const auto& st : s.sessions) {
    if (st.scenario != protocol::Scenario::BindingKey) continue;
    std::size_t j = 0;
    for (const auto& step : st.steps) {
      if (step.msg_type != "s2.step6.data") continue;
      if (step.seq > *s.tamper_seq && j < st.items.size() &&
          st.items[j].kind == OutcomeKind::Delivered) {
        bad.push_back(step.seq);
      }
      ++j;
    }
  }
  if (!bad.empty()) return {false, bad, "content readable after the platform state changed"};
  v.detail = std::to_string(v.evidence.size() - 1) + " open attempts after tamper, all refused";
  return v;
}

CheckVerdict traffic_in_memory(const RunReport& r) {
  std::size_t network = 0;
  for (const auto& e : r.transcript) network += e.is_local() ? 0 : 1;
  CheckVerdict v;
  if (r.config.topology == net::Topology::Centralised) {
    v.pass = r.observer.captured.size() == network &&
             r.observer.linkage.size() == r.observer.captured.size() &&
             (network == 0 || !r.observer.linkage.empty());
    for (const auto& e : r.observer.captured) v.evidence.push_back(e.seq);
    v.detail = std::to_string(r.noc.pairs.size()) + " communicating pairs visible to the NOC";
  } else {
    v.pass = r.observer.captured.empty();
    v.detail = "no relay; the NOC observes nothing";
  }
  return v;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

}  // namespace

bool RunReport::all_pass() const {
  return std::all_of(kCheckNames.begin(), kCheckNames.end(), [&](const std::string& n) {
    auto it = checks.find(n);
    return it != checks.end() && it->second.pass;
  });
}

double RunReport::push_seconds() const {
  double total = 0;
  for (const auto& c : charges) {
    if (c.phase == "push") total += c.seconds;
  }
  return total + push_transmission_seconds;
}

std::uint64_t RunReport::charge_count(std::string_view label) const {
  return static_cast<std::uint64_t>(
      std::count_if(charges.begin(), charges.end(), [&](const auto& c) { return c.label == label; }));
}

RunReport run(const RunConfig& config) {
  config.validate();
  World w = build_world(config);
  auto& net = w.net;
  RunReport report;
  report.config = config;
  RunState state;

  auto seal_selection = tpm::make_selection(config.seal_selection);
  protocol::PushOptions options;
  options.independent_encryption = config.independent_encryption;
  options.fresh_aik = config.fresh_aik_per_push;
  options.seal_selection = seal_selection;
  const protocol::Scenario scenario = config.scenario == 1 ? protocol::Scenario::PerPushAttestation
                                                           : protocol::Scenario::BindingKey;

  net.set_phase("provisioning");
  try {
    if (scenario == protocol::Scenario::PerPushAttestation) {
      if (config.fresh_aik_per_push) {
        if (config.aik_prefetch) protocol::prefetch_aiks(w.device, net, config.messages);
      } else {
        if (config.aik_prefetch) protocol::prefetch_aiks(w.device, net, 1);
        protocol::enroll_aik(w.device, w.pki, net);
      }
    } else {
      if (config.aik_prefetch) protocol::prefetch_aiks(w.device, net, 1);
      protocol::scenario2_provision(w.device, w.pki, w.server, net,
                                    protocol::current_policy(w.device.tpm(), seal_selection));
      state.registered_seq = net.transcript().back().seq;
    }
  } catch (const net::NetError& e) {
    report.events.push_back("provisioning failed: " + std::string(to_string(e.code())));
  } catch (const pca::PcaError& e) {
    report.events.push_back("provisioning failed: " + std::string(to_string(e.code())));
  } catch (const protocol::ProtocolError& e) {
    report.events.push_back("provisioning failed: " + std::string(to_string(e.code())));
  }
  double provisioning_end = net.clock().now();

  net.set_phase("push");
  auto apply_faults = [&](std::uint64_t k) {
    if (config.tamper_after == k) {
      protocol::tamper(w.device, net, config.tamper_pcr);
      state.tamper_seq = net.transcript().back().seq;
      report.events.push_back("tamper pcr " + std::to_string(config.tamper_pcr) +
                              " after message " + std::to_string(k));
      auto attempts = protocol::open_inbox(w.device, net);
      report.open_attempts.insert(report.open_attempts.end(), attempts.begin(), attempts.end());
    }
    if (config.noc_down_after == k) {
      if (config.topology == net::Topology::Centralised) {
        net.set_noc_available(false);
        report.events.push_back("noc down after message " + std::to_string(k));
      } else {
        report.events.push_back("noc_down_after ignored: decentralised topology has no NOC");
      }
    }
  };
  auto enqueue = [&](std::uint64_t index) {
    auto payload = message_payload(index, config, w.marker);
    if (config.pull_mode) {
      w.source.offer(kUser, std::move(payload));
      protocol::poll(w.source, w.server);
    } else {
      protocol::notify(w.source, w.server, kUser, std::move(payload));
    }
  };
  auto record = [&](protocol::SessionTranscript st, std::size_t expected) {
    auto items = st.items;
    items.resize(expected, Outcome{OutcomeKind::Failed, "NotAttempted"});
    report.outcomes.insert(report.outcomes.end(), items.begin(), items.end());
    state.sessions.push_back(std::move(st));
  };
  auto push_batch = [&](std::size_t count) {
    try {
      if (config.bulk) {
        record(protocol::bulk_push(w.server, w.device, w.pki, net, scenario, options, count), count);
      } else if (scenario == protocol::Scenario::PerPushAttestation) {
        record(protocol::scenario1_push(w.server, w.device, w.pki, net, options), count);
      } else {
        record(protocol::scenario2_push(w.server, w.device, net), count);
      }
    } catch (const protocol::ProtocolError& e) {
      // Undeliverable items leave the queue with the failure recorded.
      w.server.take_pending(kUser, count);
      report.outcomes.insert(report.outcomes.end(), count, failed_with(e));
    } catch (const tpm::TpmError& e) {
      w.server.take_pending(kUser, count);
      report.outcomes.insert(report.outcomes.end(), count, failed_with(e));
    }
  };

  apply_faults(0);
  if (config.bulk) {
    std::set<std::uint64_t> cuts{config.messages};
    if (config.tamper_after && *config.tamper_after > 0) cuts.insert(*config.tamper_after);
    if (config.noc_down_after && *config.noc_down_after > 0) cuts.insert(*config.noc_down_after);
    std::uint64_t done = 0;
    for (auto cut : cuts) {
      if (cut <= done) continue;
      for (auto i = done + 1; i <= cut; ++i) enqueue(i);
      push_batch(cut - done);
      done = cut;
      apply_faults(done);
    }
  } else {
    for (std::uint64_t i = 1; i <= config.messages; ++i) {
      enqueue(i);
      push_batch(1);
      apply_faults(i);
    }
  }

  if (state.tamper_seq) {
    auto attempts = protocol::open_inbox(w.device, net);
    report.open_attempts.insert(report.open_attempts.end(), attempts.begin(), attempts.end());
  }

  report.charges = net.ledger();
  for (const auto& t : net.transmissions()) {
    report.transmission_seconds += t.seconds;
    if (t.phase == "push") report.push_transmission_seconds += t.seconds;
  }
  report.final_clock = net.clock().now();
  report.provisioning_latency = provisioning_end;
  report.total_latency = report.final_clock - provisioning_end;
  report.per_push_latency =
      config.messages == 0 ? 0.0 : report.push_seconds() / static_cast<double>(config.messages);
  for (const auto& e : net.transcript()) ++report.envelope_counts[e.msg_type];

  report.markers.push_back(w.marker);
  for (const auto& m : config.noc_malicious_markers) report.markers.push_back(to_bytes(m));
  report.noc = net::noc_report(net.observer(), report.markers);
  report.transcript = net.transcript();
  report.observer = net.observer();

  report.checks["e2e_confidentiality"] = e2e_in_memory(report);
  report.checks["attestation_gating"] = gating_in_memory(state);
  report.checks["lockout_after_tamper"] = lockout_in_memory(report, state);
  report.checks["noc_traffic_analysis"] = traffic_in_memory(report);

  report.keystore_documents.push_back(
      {keystore::tpm_file_name(w.device.tpm()),
       keystore::export_tpm(w.device.tpm(), config.keystore_passphrase, w.keystore_rng)});
  report.keystore_documents.push_back(
      {std::string(keystore::kPcaFileName),
       keystore::export_pca(w.pki.ca, config.keystore_passphrase, w.keystore_rng)});
  return report;
}

std::string report_json(const RunReport& r) {
  ordered_json j;
  j["format"] = "pushsim-report/1";
  j["config"] = ordered_json::parse(config_json(r.config));
  auto& outcomes = j["outcomes"] = ordered_json::array();
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    outcomes.push_back({{"message", i + 1}, {"outcome", r.outcomes[i].str()}});
  }
  auto& charges = j["charges"] = ordered_json::array();
  for (const auto& c : r.charges) {
    charges.push_back({{"label", c.label}, {"seconds", c.seconds}, {"phase", c.phase}, {"at", c.at}});
  }
  j["transmission_seconds"] = r.transmission_seconds;
  j["final_clock"] = r.final_clock;
  j["provisioning_latency"] = r.provisioning_latency;
  j["total_latency"] = r.total_latency;
  j["per_push_latency"] = r.per_push_latency;
  j["envelope_counts"] = ordered_json::object();
  for (const auto& [type, n] : r.envelope_counts) j["envelope_counts"][type] = n;

  ordered_json noc;
  noc["captured"] = r.noc.captured;
  noc["pairs"] = ordered_json::array();
  for (const auto& p : r.noc.pairs) {
    noc["pairs"].push_back({{"from", p.from},
                            {"to", p.to},
                            {"count", p.count},
                            {"first_seen", p.first_seen},
                            {"last_seen", p.last_seen}});
  }
  noc["marker_hits"] = ordered_json::array();
  for (const auto& h : r.noc.marker_hits) {
    noc["marker_hits"].push_back({{"seq", h.seq}, {"marker", h.marker_index}});
  }
  j["noc"] = noc;
  j["markers_hex"] = ordered_json::array();
  for (const auto& m : r.markers) j["markers_hex"].push_back(to_hex(m));
  j["transcript"] = r.config.transcript_path;
  j["noc_dump"] = r.config.noc_dump_path.empty() ? ordered_json(nullptr)
                                                 : ordered_json(r.config.noc_dump_path);
  j["keystore"] = r.config.keystore_path.empty() ? ordered_json(nullptr)
                                                 : ordered_json(r.config.keystore_path);
  j["events"] = r.events;
  auto& checks = j["checks"] = ordered_json::object();
  for (const auto& name : kCheckNames) {
    const auto& v = r.checks.at(name);
    checks[name] = {{"pass", v.pass}, {"evidence", v.evidence}, {"detail", v.detail}};
  }
  return j.dump(2) + "\n";
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw IoError("cannot write " + path);
}

}  // namespace

RunReport run_and_write(const RunConfig& config) {
  auto report = run(config);
  if (!config.transcript_path.empty()) {
    std::ostringstream ss;
    net::write_transcript(ss, report.transcript);
    write_file(config.transcript_path, ss.str());
  }
  if (!config.noc_dump_path.empty()) {
    std::ostringstream ss;
    net::write_noc_dump(ss, report.observer);
    write_file(config.noc_dump_path, ss.str());
  }
  if (!config.keystore_path.empty()) {
    try {
      for (const auto& [name, doc] : report.keystore_documents) {
        keystore::write_document(config.keystore_path, name, doc);
      }
    } catch (const keystore::KeystoreError& e) {
      throw IoError(e.what());
    }
  }
  if (!config.report_path.empty()) write_file(config.report_path, report_json(report));
  return report;
}

std::vector<ComparisonRow> compare(const RunReport& a, const RunReport& b) {
  std::vector<ComparisonRow> rows;
  auto add = [&](std::string metric, std::string x, std::string y) {
    rows.push_back({std::move(metric), std::move(x), std::move(y)});
  };
  add("scenario", std::to_string(a.config.scenario), std::to_string(b.config.scenario));
  add("topology", std::string(net::to_string(a.config.topology)),
      std::string(net::to_string(b.config.topology)));
  add("messages", std::to_string(a.config.messages), std::to_string(b.config.messages));
  add("bulk", a.config.bulk ? "yes" : "no", b.config.bulk ? "yes" : "no");
  add("per_push_latency", fmt(a.per_push_latency), fmt(b.per_push_latency));
  add("push_total", fmt(a.push_seconds()), fmt(b.push_seconds()));
  add("provisioning_latency", fmt(a.provisioning_latency), fmt(b.provisioning_latency));
  add("final_clock", fmt(a.final_clock), fmt(b.final_clock));

  std::set<std::string> labels;
  for (const auto& c : a.charges) labels.insert(c.label);
  for (const auto& c : b.charges) labels.insert(c.label);
  auto total = [](const RunReport& r, const std::string& label) {
    double s = 0;
    for (const auto& c : r.charges) {
      if (c.label == label) s += c.seconds;
    }
    return fmt(static_cast<double>(r.charge_count(label))) + " x / " + fmt(s) + " s";
  };
  for (const auto& l : labels) add("charge " + l, total(a, l), total(b, l));

  std::set<std::string> types;
  for (const auto& [t, _] : a.envelope_counts) types.insert(t);
  for (const auto& [t, _] : b.envelope_counts) types.insert(t);
  auto count = [](const RunReport& r, const std::string& t) {
    auto it = r.envelope_counts.find(t);
    return std::to_string(it == r.envelope_counts.end() ? 0 : it->second);
  };
  for (const auto& t : types) add("envelopes " + t, count(a, t), count(b, t));
  return rows;
}

void print_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  std::size_t w0 = 6, w1 = 1;
  for (const auto& r : rows) {
    w0 = std::max(w0, r.metric.size());
    w1 = std::max(w1, r.a.size());
  }
  out << std::left << std::setw(static_cast<int>(w0)) << "metric" << "  "
      << std::setw(static_cast<int>(w1)) << "A" << "  B\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(w0)) << r.metric << "  "
        << std::setw(static_cast<int>(w1)) << r.a << "  " << r.b << '\n';
  }
}

}  // namespace pushsim::cli

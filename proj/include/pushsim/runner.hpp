// Scenario runner behind the pushsim command line: configuration, one
// simulated run with its fault schedule, the security check suite and the
// report document.
//
// Report (JSON):
//   format "pushsim-report/1", config, outcomes[{message, outcome}],
//   charges[{label, seconds, phase, at}], transmission_seconds, final_clock,
//   provisioning_latency, total_latency, per_push_latency, envelope_counts,
//   noc{captured, pairs[{from, to, count, first_seen, last_seen}],
//   marker_hits[{seq, marker}]}, markers_hex, transcript, noc_dump, keystore,
//   events, checks{<name>: {pass, evidence, detail}}
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushsim/crypto.hpp"
#include "pushsim/netsim.hpp"
#include "pushsim/protocol.hpp"
#include "pushsim/transcript.hpp"

namespace pushsim::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Artifacts that do not parse or do not belong together.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExtraComponent {
  std::uint32_t pcr = 0;
  std::string name;
  std::string code;
};

struct RunConfig {
  int scenario = 1;
  net::Topology topology = net::Topology::Centralised;
  std::uint64_t messages = 1;
  bool bulk = false;
  bool independent_encryption = true;
  bool fresh_aik_per_push = false;
  bool aik_prefetch = false;
  std::optional<std::uint64_t> tamper_after;
  std::uint32_t tamper_pcr = protocol::kAppPcr;
  std::optional<std::uint64_t> noc_down_after;
  std::vector<std::string> noc_malicious_markers;
  std::map<std::string, double> cost_overrides;
  std::uint64_t seed = 1;
  crypto::KeyScheme key_scheme = crypto::KeyScheme::Ed25519X25519;
  std::vector<std::uint32_t> seal_selection{protocol::kAppPcr};
  /// Measured after the standard boot chain; not on the whitelist.
  std::vector<ExtraComponent> extra_boot_components;
  /// Additional whitelist entries; `pcr` is ignored.
  std::vector<ExtraComponent> whitelist;
  /// Source offers content and the server polls, instead of source notify.
  bool pull_mode = false;

  std::string transcript_path;
  std::string report_path;
  std::string noc_dump_path;
  std::string keystore_path;
  std::string keystore_passphrase = "pushsim";

  /// Throws ConfigError.
  void validate() const;
  net::CostTable costs() const;
};

inline constexpr std::size_t kMinTextMarkerSize = 8;

/// Unknown keys and wrong types raise ConfigError.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);
std::string config_json(const RunConfig& config);

inline const std::vector<std::string> kCheckNames = {
    "e2e_confidentiality", "attestation_gating", "lockout_after_tamper", "noc_traffic_analysis"};

struct CheckVerdict {
  bool pass = false;
  std::vector<std::uint64_t> evidence;  // transcript seq numbers
  std::string detail;

  bool operator==(const CheckVerdict&) const = default;
};

using CheckSuite = std::map<std::string, CheckVerdict>;

struct RunReport {
  RunConfig config;
  std::vector<protocol::Outcome> outcomes;  // one per message, in order
  std::vector<net::Charge> charges;
  double transmission_seconds = 0;
  double push_transmission_seconds = 0;
  double final_clock = 0;
  double provisioning_latency = 0;
  double total_latency = 0;  // final_clock minus provisioning
  double per_push_latency = 0;
  std::map<std::string, std::uint64_t> envelope_counts;
  net::NocReport noc;
  std::vector<Bytes> markers;  // the per-run random marker first
  std::vector<std::string> events;
  CheckSuite checks;

  // In-memory artifacts of the run; not part of the report document.
  std::vector<net::Envelope> transcript;
  net::NocObserver observer;
  std::vector<protocol::OpenAttempt> open_attempts;
  std::vector<std::pair<std::string, std::string>> keystore_documents;  // file name, content

  bool all_pass() const;
  /// Sum of charges and transmissions in the "push" phase.
  double push_seconds() const;
  std::uint64_t charge_count(std::string_view label) const;
};

/// Executes the configured run in memory. Protocol failures are recorded as
/// outcomes; ConfigError for an invalid configuration.
RunReport run(const RunConfig& config);

/// run() followed by writing the transcript, report, NOC dump and key store
/// to the configured paths (empty path: not written). Throws IoError.
RunReport run_and_write(const RunConfig& config);

std::string report_json(const RunReport& report);

/// Independent recomputation from the transcript, the NOC dump (required for
/// centralised confidentiality) and the report's configuration and markers.
CheckSuite recompute_checks(const std::vector<net::TranscriptRecord>& transcript,
                            const std::optional<std::vector<net::DumpRecord>>& noc_dump,
                            net::Topology topology, const std::vector<Bytes>& markers);

struct CheckResult {
  CheckSuite recomputed;
  CheckSuite reported;
  std::vector<std::string> mismatches;  // check names whose pass flags differ

  bool all_pass() const;
};

/// Reads the artifacts and recomputes every check. `noc_dump_path` empty
/// means the path recorded in the report. Throws ParseError or IoError.
CheckResult check(const std::string& transcript_path, const std::string& report_path,
                  const std::string& noc_dump_path = {});

struct ComparisonRow {
  std::string metric;
  std::string a;
  std::string b;
};

/// Side-by-side per-push latency, charge totals and envelope counts.
std::vector<ComparisonRow> compare(const RunReport& a, const RunReport& b);
void print_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace pushsim::cli

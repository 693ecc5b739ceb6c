// pushsim: run the trusted push scenarios, re-check their artifacts and
// compare two configurations.
//
// Exit status: 0 all checks pass, 1 a check failed, 2 configuration, parse or
// I/O error, 3 report and recomputation disagree.

#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "pushsim/keystore.hpp"
#include "pushsim/runner.hpp"

namespace {

using namespace pushsim;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitError = 2;
constexpr int kExitMismatch = 3;

struct RunFlags {
  std::string config_path;
  std::optional<int> scenario;
  std::optional<std::string> topology;
  std::optional<std::uint64_t> messages;
  std::optional<bool> bulk;
  std::optional<bool> independent_encryption;
  std::optional<bool> fresh_aik_per_push;
  std::optional<bool> aik_prefetch;
  std::optional<std::uint64_t> tamper_after;
  std::optional<std::uint32_t> tamper_pcr;
  std::optional<std::uint64_t> noc_down_after;
  std::vector<std::string> markers;
  std::vector<std::string> costs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> key_scheme;
  std::optional<std::string> output;
  std::optional<std::string> report;
  std::optional<std::string> dump_noc;
  std::optional<std::string> keystore;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--config", f.config_path, "JSON RunConfig file");
  cmd.add_option("--scenario", f.scenario, "1 (per-push attestation) or 2 (binding key)");
  cmd.add_option("--topology", f.topology, "centralised or decentralised");
  cmd.add_option("--messages", f.messages, "number of pushes");
  cmd.add_flag("--bulk,!--no-bulk", f.bulk, "one session for consecutive messages");
  cmd.add_flag("--independent-encryption,!--no-independent-encryption", f.independent_encryption,
               "scenario 1 step-4 key exchange");
  cmd.add_flag("--fresh-aik-per-push,!--no-fresh-aik-per-push", f.fresh_aik_per_push,
               "new AIK for every scenario 1 session");
  cmd.add_flag("--aik-prefetch,!--no-aik-prefetch", f.aik_prefetch,
               "generate AIKs during provisioning");
  cmd.add_option("--tamper-after", f.tamper_after, "extend a PCR after this message");
  cmd.add_option("--tamper-pcr", f.tamper_pcr, "register changed by the tamper event");
  cmd.add_option("--noc-down-after", f.noc_down_after, "NOC unavailable after this message");
  cmd.add_option("--marker", f.markers, "extra plaintext marker (repeatable)");
  cmd.add_option("--cost", f.costs, "cost override name=seconds (repeatable)");
  cmd.add_option("--seed", f.seed, "64-bit run seed");
  cmd.add_option("--key-scheme", f.key_scheme, "ed25519-x25519 or rsa-1024");
  cmd.add_option("--output", f.output, "transcript path (JSON Lines)");
  cmd.add_option("--report", f.report, "report path (JSON)");
  cmd.add_option("--dump-noc", f.dump_noc, "write NOC-captured payloads here");
  cmd.add_option("--keystore", f.keystore, "key store directory");
}

cli::RunConfig resolve(const RunFlags& f) {
  cli::RunConfig c = f.config_path.empty() ? cli::RunConfig{} : cli::load_config(f.config_path);
  if (f.scenario) c.scenario = *f.scenario;
  if (f.topology) {
    try {
      c.topology = net::parse_topology(*f.topology);
    } catch (const std::invalid_argument& e) {
      throw cli::ConfigError(e.what());
    }
  }
  if (f.messages) c.messages = *f.messages;
  if (f.bulk) c.bulk = *f.bulk;
  if (f.independent_encryption) c.independent_encryption = *f.independent_encryption;
  if (f.fresh_aik_per_push) c.fresh_aik_per_push = *f.fresh_aik_per_push;
  if (f.aik_prefetch) c.aik_prefetch = *f.aik_prefetch;
  if (f.tamper_after) c.tamper_after = *f.tamper_after;
  if (f.tamper_pcr) c.tamper_pcr = *f.tamper_pcr;
  if (f.noc_down_after) c.noc_down_after = *f.noc_down_after;
  for (const auto& m : f.markers) c.noc_malicious_markers.push_back(m);
  for (const auto& kv : f.costs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw cli::ConfigError("--cost expects name=seconds");
    try {
      std::size_t used = 0;
      double v = std::stod(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing text");
      c.cost_overrides[kv.substr(0, eq)] = v;
    } catch (const std::exception&) {
      throw cli::ConfigError("bad cost value in " + kv);
    }
  }
  if (f.seed) c.seed = *f.seed;
  if (f.key_scheme) {
    try {
      c.key_scheme = crypto::parse_key_scheme(*f.key_scheme);
    } catch (const std::invalid_argument& e) {
      throw cli::ConfigError(e.what());
    }
  }
  if (f.output) c.transcript_path = *f.output;
  if (f.report) c.report_path = *f.report;
  if (f.dump_noc) c.noc_dump_path = *f.dump_noc;
  if (const char* env = std::getenv("PUSHSIM_KEYSTORE"); env && *env) c.keystore_path = env;
  if (f.keystore) c.keystore_path = *f.keystore;
  c.validate();
  return c;
}

void print_checks(const cli::CheckSuite& checks) {
  for (const auto& name : cli::kCheckNames) {
    const auto& v = checks.at(name);
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << "  " << v.detail << '\n';
  }
}

int cmd_run(const RunFlags& flags) {
  auto config = resolve(flags);
  auto report = cli::run_and_write(config);
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    std::cout << "message " << i + 1 << ": " << report.outcomes[i].str() << '\n';
  }
  for (const auto& e : report.events) std::cout << "event: " << e << '\n';
  std::cout << "total latency " << report.total_latency << " s, per push "
            << report.per_push_latency << " s, provisioning " << report.provisioning_latency
            << " s\n";
  print_checks(report.checks);
  return report.all_pass() ? kExitPass : kExitCheckFailed;
}

int cmd_check(const std::string& transcript, const std::string& report, const std::string& dump) {
  auto result = cli::check(transcript, report, dump);
  print_checks(result.recomputed);
  for (const auto& name : result.mismatches) {
    std::cout << "MISMATCH " << name << ": report says "
              << (result.reported.at(name).pass ? "pass" : "fail") << '\n';
  }
  if (!result.mismatches.empty()) return kExitMismatch;
  return result.all_pass() ? kExitPass : kExitCheckFailed;
}

int cmd_compare(const std::string& a_path, const std::string& b_path) {
  auto a = cli::run(cli::load_config(a_path));
  auto b = cli::run(cli::load_config(b_path));
  cli::print_comparison(std::cout, cli::compare(a, b));
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trusted push delivery simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "execute one configured run");
  add_run_flags(*run, run_flags);

  std::string transcript, report, dump;
  auto* check = app.add_subcommand("check", "recompute security checks from run artifacts");
  check->add_option("transcript", transcript, "transcript file")->required();
  check->add_option("report", report, "report file")->required();
  check->add_option("--dump-noc", dump, "NOC dump (default: path recorded in the report)");

  std::string config_a, config_b;
  auto* compare = app.add_subcommand("compare", "run two configs and tabulate them");
  compare->add_option("config_a", config_a)->required();
  compare->add_option("config_b", config_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*check) return cmd_check(transcript, report, dump);
    if (*compare) return cmd_compare(config_a, config_b);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const cli::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
  } catch (const cli::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
  } catch (const keystore::KeystoreError& e) {
    std::cerr << "key store error: " << e.what() << '\n';
  }
  return kExitError;
}

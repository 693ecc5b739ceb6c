// Deterministic message transport over a centralised (NOC relay) or
// decentralised topology, with a simulated clock driven by a cost table and
// an observer recording everything the NOC can see.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pushsim/bytes.hpp"
#include "pushsim/crypto.hpp"

namespace pushsim::net {

using ActorId = std::string;

inline const ActorId kNocId = "noc";

enum class Topology { Centralised, Decentralised };

std::string_view to_string(Topology t);
/// "centralised" or "decentralised".
Topology parse_topology(std::string_view name);

enum class NetErrc { Unreachable, NotCentralised, UnknownCost, UnknownActor, ClockRegression };

std::string_view to_string(NetErrc code);

class NetError : public std::runtime_error {
 public:
  NetError(NetErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  NetErrc code() const { return code_; }

 private:
  NetErrc code_;
};

struct Envelope {
  std::uint64_t seq = 0;
  double sim_time = 0;
  ActorId from;
  ActorId to;
  std::optional<ActorId> via;
  std::string msg_type;
  Bytes payload;
  std::uint64_t size = 0;

  crypto::Digest payload_digest() const { return crypto::hash(payload); }
  /// Device-internal audit events share the transcript but never cross the network.
  bool is_local() const { return msg_type.starts_with("local."); }
};

struct LinkRecord {
  ActorId from;
  ActorId to;
  double sim_time = 0;

  bool operator==(const LinkRecord&) const = default;
};

struct NocObserver {
  std::vector<Envelope> captured;
  std::vector<LinkRecord> linkage;

  void capture(const Envelope& e);
};

struct CostTable {
  double aik_generation = 7.0;
  double remote_attestation = 8.0;
  double pca_roundtrip = 7.0;
  double channel_setup = 4.0;
  double key_exchange = 2.0;
  double seal_op = 2.0;
  double per_kilobyte = 0.0;

  static const std::vector<std::string_view>& names();
  /// Throws NetError(UnknownCost).
  double get(std::string_view name) const;
  double& at(std::string_view name);
  bool valid() const;
};

class SimClock {
 public:
  double now() const { return now_; }
  /// Throws NetError(ClockRegression) for negative or non-finite steps.
  void advance(double seconds);

 private:
  double now_ = 0;
};

struct Charge {
  std::string label;
  double seconds = 0;
  std::string phase;
  double at = 0;  // clock after the charge
};

struct Transmission {
  std::uint64_t seq = 0;
  double seconds = 0;
  std::string phase;
};

struct DeliveryReceipt {
  std::uint64_t seq = 0;
  double delivered_at = 0;
};

/// KiB charged for a payload: 0 for empty, otherwise ceil(size / 1024).
std::uint64_t charged_kilobytes(std::uint64_t size);

class Network {
 public:
  Network(Topology topology, CostTable costs);

  void add_actor(const ActorId& id);
  bool has_actor(const ActorId& id) const;

  /// Charges transmission time, relays via the NOC in centralised mode and
  /// appends to the transcript. Throws Unreachable when the NOC is down.
  DeliveryReceipt send(const ActorId& from, const ActorId& to, std::string msg_type, Bytes payload);
  /// Appends a zero-size local event; not routed, charged or observed.
  std::uint64_t record_local(const ActorId& actor, std::string msg_type);

  /// Throws NotCentralised in the decentralised topology.
  void set_noc_available(bool available);
  bool noc_available() const { return noc_up_; }

  /// Throws UnknownCost.
  void charge(std::string_view cost_name);
  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }

  Topology topology() const { return topology_; }
  const CostTable& costs() const { return costs_; }
  const SimClock& clock() const { return clock_; }
  const std::vector<Envelope>& transcript() const { return transcript_; }
  const NocObserver& observer() const { return observer_; }
  const std::vector<Charge>& ledger() const { return ledger_; }
  const std::vector<Transmission>& transmissions() const { return transmissions_; }

 private:
  void require_actor(const ActorId& id) const;

  Topology topology_;
  CostTable costs_;
  SimClock clock_;
  bool noc_up_ = true;
  std::string phase_ = "setup";
  std::uint64_t next_seq_ = 1;
  std::vector<ActorId> actors_;
  std::vector<Envelope> transcript_;
  NocObserver observer_;
  std::vector<Charge> ledger_;
  std::vector<Transmission> transmissions_;
};

struct PairTraffic {
  ActorId from;
  ActorId to;
  std::uint64_t count = 0;
  double first_seen = 0;
  double last_seen = 0;
};

struct MarkerHit {
  std::uint64_t seq = 0;
  std::size_t marker_index = 0;
};

struct NocReport {
  std::vector<PairTraffic> pairs;  // sorted by (from, to)
  std::vector<MarkerHit> marker_hits;
  std::uint64_t captured = 0;
};

/// Traffic analysis the NOC can always do plus a scan of captured payloads
/// for plaintext markers it should never find.
NocReport noc_report(const NocObserver& observer, const std::vector<Bytes>& markers);

}  // namespace pushsim::net

#include "pushsim/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace pushsim::net {

std::string_view to_string(Topology t) {
  return t == Topology::Centralised ? "centralised" : "decentralised";
}

Topology parse_topology(std::string_view name) {
  if (name == "centralised") return Topology::Centralised;
  if (name == "decentralised") return Topology::Decentralised;
  throw std::invalid_argument("unknown topology: " + std::string(name));
}

std::string_view to_string(NetErrc code) {
  switch (code) {
    case NetErrc::Unreachable: return "Unreachable";
    case NetErrc::NotCentralised: return "NotCentralised";
    case NetErrc::UnknownCost: return "UnknownCost";
    case NetErrc::UnknownActor: return "UnknownActor";
    case NetErrc::ClockRegression: return "ClockRegression";
  }
  return "?";
}

void NocObserver::capture(const Envelope& e) {
  captured.push_back(e);
  linkage.push_back({e.from, e.to, e.sim_time});
}

const std::vector<std::string_view>& CostTable::names() {
  static const std::vector<std::string_view> kNames = {
      "aik_generation", "remote_attestation", "pca_roundtrip", "channel_setup",
      "key_exchange",   "seal_op",            "per_kilobyte"};
  return kNames;
}

double& CostTable::at(std::string_view name) {
  if (name == "aik_generation") return aik_generation;
  if (name == "remote_attestation") return remote_attestation;
  if (name == "pca_roundtrip") return pca_roundtrip;
  if (name == "channel_setup") return channel_setup;
  if (name == "key_exchange") return key_exchange;
  if (name == "seal_op") return seal_op;
  if (name == "per_kilobyte") return per_kilobyte;
  throw NetError(NetErrc::UnknownCost, "unknown cost: " + std::string(name));
}

double CostTable::get(std::string_view name) const {
  return const_cast<CostTable*>(this)->at(name);
}

bool CostTable::valid() const {
  return std::all_of(names().begin(), names().end(), [&](auto n) {
    double v = get(n);
    return std::isfinite(v) && v >= 0;
  });
}

void SimClock::advance(double seconds) {
  if (!std::isfinite(seconds) || seconds < 0) {
    throw NetError(NetErrc::ClockRegression, "clock advance must be finite and non-negative");
  }
  now_ += seconds;
}

std::uint64_t charged_kilobytes(std::uint64_t size) { return (size + 1023) / 1024; }

Network::Network(Topology topology, CostTable costs) : topology_(topology), costs_(costs) {
  if (!costs_.valid()) throw std::invalid_argument("cost table entries must be non-negative");
}

void Network::add_actor(const ActorId& id) {
  if (id == kNocId) throw std::invalid_argument("actor id 'noc' is reserved");
  if (!has_actor(id)) actors_.push_back(id);
}

bool Network::has_actor(const ActorId& id) const {
  return std::find(actors_.begin(), actors_.end(), id) != actors_.end();
}

void Network::require_actor(const ActorId& id) const {
  if (!has_actor(id)) throw NetError(NetErrc::UnknownActor, "unknown actor: " + id);
}

DeliveryReceipt Network::send(const ActorId& from, const ActorId& to, std::string msg_type,
                              Bytes payload) {
  require_actor(from);
  require_actor(to);
  const bool relayed = topology_ == Topology::Centralised;
  if (relayed && !noc_up_) {
    throw NetError(NetErrc::Unreachable, "NOC unavailable: " + from + " -> " + to);
  }

  Envelope e;
  e.seq = next_seq_++;
  e.from = from;
  e.to = to;
  if (relayed) e.via = kNocId;
  e.msg_type = std::move(msg_type);
  e.size = payload.size();
  e.payload = std::move(payload);

  double cost = costs_.per_kilobyte * static_cast<double>(charged_kilobytes(e.size));
  clock_.advance(cost);
  transmissions_.push_back({e.seq, cost, phase_});
  e.sim_time = clock_.now();

  if (relayed) observer_.capture(e);
  transcript_.push_back(e);
  return {e.seq, e.sim_time};
}

std::uint64_t Network::record_local(const ActorId& actor, std::string msg_type) {
  require_actor(actor);
  Envelope e;
  e.seq = next_seq_++;
  e.sim_time = clock_.now();
  e.from = actor;
  e.to = actor;
  e.msg_type = "local." + msg_type;
  transcript_.push_back(std::move(e));
  return transcript_.back().seq;
}

void Network::set_noc_available(bool available) {
  if (topology_ != Topology::Centralised) {
    throw NetError(NetErrc::NotCentralised, "decentralised topology has no NOC");
  }
  noc_up_ = available;
}

void Network::charge(std::string_view cost_name) {
  double seconds = costs_.get(cost_name);
  clock_.advance(seconds);
  ledger_.push_back({std::string(cost_name), seconds, phase_, clock_.now()});
}

NocReport noc_report(const NocObserver& observer, const std::vector<Bytes>& markers) {
  NocReport report;
  report.captured = observer.captured.size();
  std::map<std::pair<ActorId, ActorId>, PairTraffic> pairs;
  for (const auto& link : observer.linkage) {
    auto [it, inserted] = pairs.try_emplace({link.from, link.to});
    auto& p = it->second;
    if (inserted) {
      p.from = link.from;
      p.to = link.to;
      p.first_seen = link.sim_time;
    }
    ++p.count;
    p.last_seen = link.sim_time;
  }
  for (auto& [_, p] : pairs) report.pairs.push_back(p);

  for (const auto& e : observer.captured) {
    for (std::size_t i = 0; i < markers.size(); ++i) {
      if (contains(e.payload, markers[i])) report.marker_hits.push_back({e.seq, i});
    }
  }
  return report;
}

}  // namespace pushsim::net

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "pushsim/netsim.hpp"
#include "pushsim/transcript.hpp"

using namespace pushsim;
using namespace pushsim::net;

namespace {

template <typename F>
NetErrc net_error_of(F&& f) {
  try {
    f();
  } catch (const NetError& e) {
    return e.code();
  }
  throw std::logic_error("expected a NetError");
}

Network make_network(Topology t, CostTable costs = {}) {
  Network n(t, costs);
  n.add_actor("server");
  n.add_actor("device");
  n.add_actor("pca");
  return n;
}

}  // namespace

TEST(CostTable, DefaultsAndLookup) {
  CostTable c;
  EXPECT_EQ(c.get("aik_generation"), 7.0);
  EXPECT_EQ(c.get("remote_attestation"), 8.0);
  EXPECT_EQ(c.get("pca_roundtrip"), 7.0);
  EXPECT_EQ(c.get("channel_setup"), 4.0);
  EXPECT_EQ(c.get("key_exchange"), 2.0);
  EXPECT_EQ(c.get("seal_op"), 2.0);
  EXPECT_EQ(c.get("per_kilobyte"), 0.0);
  EXPECT_EQ(CostTable::names().size(), 7u);
  EXPECT_EQ(net_error_of([&] { c.get("teleport"); }), NetErrc::UnknownCost);
  c.at("seal_op") = -1;
  EXPECT_FALSE(c.valid());
  c.at("seal_op") = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(c.valid());
}

TEST(SimClock, RejectsRegression) {
  SimClock clock;
  clock.advance(1.5);
  EXPECT_EQ(net_error_of([&] { clock.advance(-0.1); }), NetErrc::ClockRegression);
  EXPECT_EQ(net_error_of([&] { clock.advance(std::nan("")); }), NetErrc::ClockRegression);
  EXPECT_EQ(clock.now(), 1.5);
}

TEST(ChargedKilobytes, RoundsUp) {
  EXPECT_EQ(charged_kilobytes(0), 0u);
  EXPECT_EQ(charged_kilobytes(1), 1u);
  EXPECT_EQ(charged_kilobytes(1024), 1u);
  EXPECT_EQ(charged_kilobytes(1025), 2u);
  EXPECT_EQ(charged_kilobytes(2500), 3u);
}

TEST(Network, CentralisedSendIsRelayedAndCaptured) {
  auto n = make_network(Topology::Centralised);
  auto r = n.send("server", "device", "push.data", to_bytes("hello"));
  EXPECT_EQ(r.seq, 1u);
  ASSERT_EQ(n.transcript().size(), 1u);
  const auto& e = n.transcript()[0];
  EXPECT_EQ(e.via, std::optional<ActorId>(kNocId));
  EXPECT_EQ(e.size, 5u);
  ASSERT_EQ(n.observer().captured.size(), 1u);
  EXPECT_EQ(n.observer().linkage[0], (LinkRecord{"server", "device", 0.0}));
}

TEST(Network, DecentralisedSendIsNotObserved) {
  auto n = make_network(Topology::Decentralised);
  n.send("server", "device", "push.data", to_bytes("hello"));
  EXPECT_FALSE(n.transcript()[0].via.has_value());
  EXPECT_TRUE(n.observer().captured.empty());
  EXPECT_TRUE(n.observer().linkage.empty());
  EXPECT_EQ(net_error_of([&] { n.set_noc_available(false); }), NetErrc::NotCentralised);
}

TEST(Network, NocDownMakesRelayUnreachable) {
  auto n = make_network(Topology::Centralised);
  n.set_noc_available(false);
  EXPECT_EQ(net_error_of([&] { n.send("server", "device", "x", {}); }), NetErrc::Unreachable);
  EXPECT_TRUE(n.transcript().empty());
  n.set_noc_available(true);
  n.send("server", "device", "x", {});
  EXPECT_EQ(n.transcript().size(), 1u);
}

TEST(Network, UnknownActorAndReservedId) {
  auto n = make_network(Topology::Decentralised);
  EXPECT_EQ(net_error_of([&] { n.send("server", "ghost", "x", {}); }), NetErrc::UnknownActor);
  EXPECT_THROW(n.add_actor(kNocId), std::invalid_argument);
}

TEST(Network, ChargesAdvanceClockAndLedger) {
  auto n = make_network(Topology::Centralised);
  n.set_phase("push");
  n.charge("channel_setup");
  n.charge("remote_attestation");
  EXPECT_EQ(n.clock().now(), 12.0);
  ASSERT_EQ(n.ledger().size(), 2u);
  EXPECT_EQ(n.ledger()[1].label, "remote_attestation");
  EXPECT_EQ(n.ledger()[1].phase, "push");
  EXPECT_EQ(n.ledger()[1].at, 12.0);
  EXPECT_EQ(net_error_of([&] { n.charge("nope"); }), NetErrc::UnknownCost);
}

TEST(Network, PerKilobyteTransmissionCost) {
  CostTable c;
  c.per_kilobyte = 0.5;
  auto n = make_network(Topology::Decentralised, c);
  n.send("server", "device", "a", Bytes(2500));
  n.send("server", "device", "b", {});
  EXPECT_DOUBLE_EQ(n.clock().now(), 1.5);
  ASSERT_EQ(n.transmissions().size(), 2u);
  EXPECT_DOUBLE_EQ(n.transmissions()[0].seconds, 1.5);
  EXPECT_DOUBLE_EQ(n.transmissions()[1].seconds, 0.0);
  EXPECT_DOUBLE_EQ(n.transcript()[0].sim_time, 1.5);
}

TEST(Network, LocalEventsAreNotRoutedOrObserved) {
  auto n = make_network(Topology::Centralised);
  n.send("server", "device", "push.data", to_bytes("x"));
  auto seq = n.record_local("device", "tamper");
  EXPECT_EQ(seq, 2u);
  EXPECT_TRUE(n.transcript()[1].is_local());
  EXPECT_EQ(n.transcript()[1].msg_type, "local.tamper");
  EXPECT_EQ(n.observer().captured.size(), 1u);
}

TEST(Network, SequenceAndTimeAreMonotone) {
  auto n = make_network(Topology::Centralised);
  crypto::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    if (rng.next_u64() % 3 == 0) n.charge("seal_op");
    n.send("server", "device", "m", rng.bytes(rng.next_u64() % 3000));
  }
  const auto& t = n.transcript();
  for (std::size_t i = 1; i < t.size(); ++i) {
    ASSERT_EQ(t[i].seq, t[i - 1].seq + 1);
    ASSERT_GE(t[i].sim_time, t[i - 1].sim_time);
  }
}

TEST(NocReport, PairsAndMarkerHits) {
  auto n = make_network(Topology::Centralised);
  n.send("server", "device", "a", to_bytes("xxSECRET-1yy"));
  n.charge("channel_setup");
  n.send("server", "device", "b", to_bytes("nothing"));
  n.send("device", "pca", "c", to_bytes("SECRET-2"));
  auto r = noc_report(n.observer(), {to_bytes("SECRET-1"), to_bytes("SECRET-2"), {}});
  EXPECT_EQ(r.captured, 3u);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].from, "device");
  EXPECT_EQ(r.pairs[1].from, "server");
  EXPECT_EQ(r.pairs[1].count, 2u);
  EXPECT_EQ(r.pairs[1].first_seen, 0.0);
  EXPECT_EQ(r.pairs[1].last_seen, 4.0);
  ASSERT_EQ(r.marker_hits.size(), 2u);
  EXPECT_EQ(r.marker_hits[0].seq, 1u);
  EXPECT_EQ(r.marker_hits[0].marker_index, 0u);
  EXPECT_EQ(r.marker_hits[1].seq, 3u);
  EXPECT_EQ(r.marker_hits[1].marker_index, 1u);
}

TEST(Transcript, RoundTripAndDigest) {
  auto n = make_network(Topology::Centralised);
  n.send("server", "device", "push.data", to_bytes("abc"));
  n.record_local("device", "open_ok");
  std::stringstream ss;
  write_transcript(ss, n.transcript());
  auto records = read_transcript(ss);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0], to_record(n.transcript()[0]));
  // SHA-256("abc"), FIPS 180-2 example.
  EXPECT_EQ(records[0].payload_hex_digest,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(records[0].via, std::optional<ActorId>("noc"));
  EXPECT_FALSE(records[1].via.has_value());
  EXPECT_TRUE(records[1].is_local());
}

TEST(Transcript, LineKeyOrder) {
  Envelope e;
  e.seq = 7;
  e.from = "a";
  e.to = "b";
  e.msg_type = "t";
  auto line = transcript_line(e);
  const char* keys[] = {"\"seq\"", "\"sim_time\"", "\"from\"", "\"to\"", "\"via\"",
                        "\"msg_type\"", "\"payload_hex_digest\"", "\"size\""};
  std::size_t pos = 0;
  for (const char* k : keys) {
    auto found = line.find(k, pos);
    ASSERT_NE(found, std::string::npos) << k;
    pos = found;
  }
}

TEST(Transcript, MalformedLineThrows) {
  std::stringstream bad("{\"seq\": 1}\n");
  EXPECT_THROW(read_transcript(bad), CodecError);
  std::stringstream junk("not json\n");
  EXPECT_THROW(read_transcript(junk), CodecError);
}

TEST(NocDump, RoundTripCarriesPayloads) {
  auto n = make_network(Topology::Centralised);
  n.send("server", "device", "push.data", Bytes{0, 1, 2, 255});
  n.send("device", "server", "ack", {});
  std::stringstream ss;
  write_noc_dump(ss, n.observer());
  auto dump = read_noc_dump(ss);
  ASSERT_EQ(dump.size(), 2u);
  EXPECT_EQ(dump[0].payload, (Bytes{0, 1, 2, 255}));
  EXPECT_EQ(dump[1].from, "device");
  EXPECT_EQ(dump[1].msg_type, "ack");
  EXPECT_TRUE(dump[1].payload.empty());
}

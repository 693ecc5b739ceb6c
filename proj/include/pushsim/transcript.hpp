// On-disk transcript formats.
//
// Transcript (JSON Lines), one envelope per line, keys in this order:
//   seq, sim_time, from, to, via (string or null), msg_type,
//   payload_hex_digest (SHA-256 of the payload), size
// NOC dump (JSON Lines), one captured envelope per line:
//   seq, from, to, msg_type, payload_hex
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pushsim/netsim.hpp"

namespace pushsim::net {

struct TranscriptRecord {
  std::uint64_t seq = 0;
  double sim_time = 0;
  ActorId from;
  ActorId to;
  std::optional<ActorId> via;
  std::string msg_type;
  std::string payload_hex_digest;
  std::uint64_t size = 0;

  bool is_local() const { return msg_type.starts_with("local."); }
  bool operator==(const TranscriptRecord&) const = default;
};

struct DumpRecord {
  std::uint64_t seq = 0;
  ActorId from;
  ActorId to;
  std::string msg_type;
  Bytes payload;
};

TranscriptRecord to_record(const Envelope& e);
std::string transcript_line(const Envelope& e);

void write_transcript(std::ostream& out, const std::vector<Envelope>& envelopes);
void write_noc_dump(std::ostream& out, const NocObserver& observer);

/// Throw CodecError with the offending line number on malformed input.
std::vector<TranscriptRecord> read_transcript(std::istream& in);
std::vector<DumpRecord> read_noc_dump(std::istream& in);

}  // namespace pushsim::net

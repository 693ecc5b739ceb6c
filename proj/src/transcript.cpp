#include "pushsim/transcript.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace pushsim::net {

using ordered_json = nlohmann::ordered_json;

namespace {

template <typename F>
auto parse_lines(std::istream& in, F&& per_line) {
  std::vector<decltype(per_line(std::declval<const nlohmann::json&>()))> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(per_line(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw CodecError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const CodecError& e) {
      throw CodecError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

TranscriptRecord to_record(const Envelope& e) {
  return {e.seq,     e.sim_time, e.from, e.to, e.via, e.msg_type, e.payload_digest().hex(),
          e.size};
}

std::string transcript_line(const Envelope& e) {
  ordered_json j;
  j["seq"] = e.seq;
  j["sim_time"] = e.sim_time;
  j["from"] = e.from;
  j["to"] = e.to;
  j["via"] = e.via ? ordered_json(*e.via) : ordered_json(nullptr);
  j["msg_type"] = e.msg_type;
  j["payload_hex_digest"] = e.payload_digest().hex();
  j["size"] = e.size;
  return j.dump();
}

void write_transcript(std::ostream& out, const std::vector<Envelope>& envelopes) {
  for (const auto& e : envelopes) out << transcript_line(e) << '\n';
}

void write_noc_dump(std::ostream& out, const NocObserver& observer) {
  for (const auto& e : observer.captured) {
    ordered_json j;
    j["seq"] = e.seq;
    j["from"] = e.from;
    j["to"] = e.to;
    j["msg_type"] = e.msg_type;
    j["payload_hex"] = to_hex(e.payload);
    out << j.dump() << '\n';
  }
}

std::vector<TranscriptRecord> read_transcript(std::istream& in) {
  return parse_lines(in, [](const nlohmann::json& j) {
    TranscriptRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.sim_time = j.at("sim_time").get<double>();
    r.from = j.at("from").get<std::string>();
    r.to = j.at("to").get<std::string>();
    if (!j.at("via").is_null()) r.via = j.at("via").get<std::string>();
    r.msg_type = j.at("msg_type").get<std::string>();
    r.payload_hex_digest = j.at("payload_hex_digest").get<std::string>();
    r.size = j.at("size").get<std::uint64_t>();
    return r;
  });
}

std::vector<DumpRecord> read_noc_dump(std::istream& in) {
  return parse_lines(in, [](const nlohmann::json& j) {
    DumpRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.from = j.at("from").get<std::string>();
    r.to = j.at("to").get<std::string>();
    r.msg_type = j.at("msg_type").get<std::string>();
    r.payload = from_hex(j.at("payload_hex").get<std::string>());
    return r;
  });
}

}  // namespace pushsim::net

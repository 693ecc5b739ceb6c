#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pushsim/runner.hpp"

namespace pushsim::cli {

using nlohmann::json;

void RunConfig::validate() const {
  if (scenario != 1 && scenario != 2) throw ConfigError("scenario must be 1 or 2");
  if (tamper_after && *tamper_after > messages) {
    throw ConfigError("tamper_after must not exceed messages");
  }
  if (noc_down_after && *noc_down_after > messages) {
    throw ConfigError("noc_down_after must not exceed messages");
  }
  if (tamper_pcr >= tpm::kPcrCount) throw ConfigError("tamper_pcr out of range");
  for (const auto& m : noc_malicious_markers) {
    if (m.size() < kMinTextMarkerSize) {
      throw ConfigError("noc_malicious_markers entries need at least " +
                        std::to_string(kMinTextMarkerSize) + " bytes");
    }
  }
  for (const auto& c : extra_boot_components) {
    if (c.pcr >= tpm::kPcrCount) throw ConfigError("extra component pcr out of range");
    if (c.name.empty()) throw ConfigError("extra component needs a name");
  }
  for (const auto& c : whitelist) {
    if (c.name.empty()) throw ConfigError("whitelist entry needs a name");
  }
  try {
    tpm::make_selection(seal_selection);
  } catch (const tpm::TpmError&) {
    throw ConfigError("seal_selection must be a non-empty set of indices below 24");
  }
  costs();
}

net::CostTable RunConfig::costs() const {
  net::CostTable table;
  for (const auto& [name, value] : cost_overrides) {
    try {
      table.at(name) = value;
    } catch (const net::NetError&) {
      throw ConfigError("unknown cost: " + name);
    }
  }
  if (!table.valid()) throw ConfigError("cost table entries must be finite and non-negative");
  return table;
}

namespace {

template <typename T>
T field(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

std::optional<std::uint64_t> optional_index(const json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return field<std::uint64_t>(j, key);
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "scenario") {
      c.scenario = field<int>(v, key);
    } else if (key == "topology") {
      try {
        c.topology = net::parse_topology(field<std::string>(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "messages") {
      if (!v.is_number_unsigned()) throw ConfigError("messages must be a non-negative integer");
      c.messages = v.get<std::uint64_t>();
    } else if (key == "bulk") {
      c.bulk = field<bool>(v, key);
    } else if (key == "independent_encryption") {
      c.independent_encryption = field<bool>(v, key);
    } else if (key == "fresh_aik_per_push") {
      c.fresh_aik_per_push = field<bool>(v, key);
    } else if (key == "aik_prefetch") {
      c.aik_prefetch = field<bool>(v, key);
    } else if (key == "tamper_after") {
      c.tamper_after = optional_index(v, key);
    } else if (key == "tamper_pcr") {
      c.tamper_pcr = field<std::uint32_t>(v, key);
    } else if (key == "noc_down_after") {
      c.noc_down_after = optional_index(v, key);
    } else if (key == "noc_malicious_markers") {
      c.noc_malicious_markers = field<std::vector<std::string>>(v, key);
    } else if (key == "cost_overrides") {
      c.cost_overrides = field<std::map<std::string, double>>(v, key);
    } else if (key == "seed") {
      c.seed = field<std::uint64_t>(v, key);
    } else if (key == "key_scheme") {
      try {
        c.key_scheme = crypto::parse_key_scheme(field<std::string>(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "seal_selection") {
      c.seal_selection = field<std::vector<std::uint32_t>>(v, key);
    } else if (key == "extra_boot_components" || key == "whitelist") {
      if (!v.is_array()) throw ConfigError(key + " must be a list");
      auto& target = key == "whitelist" ? c.whitelist : c.extra_boot_components;
      for (const auto& item : v) {
        if (!item.is_object()) throw ConfigError(key + " entries must be objects");
        target.push_back({field<std::uint32_t>(item.value("pcr", json(0)), "pcr"),
                          field<std::string>(item.value("name", json()), "name"),
                          field<std::string>(item.value("code", json()), "code")});
      }
    } else if (key == "pull_mode") {
      c.pull_mode = field<bool>(v, key);
    } else if (key == "transcript") {
      c.transcript_path = field<std::string>(v, key);
    } else if (key == "report") {
      c.report_path = field<std::string>(v, key);
    } else if (key == "noc_dump") {
      c.noc_dump_path = field<std::string>(v, key);
    } else if (key == "keystore") {
      c.keystore_path = field<std::string>(v, key);
    } else if (key == "keystore_passphrase") {
      c.keystore_passphrase = field<std::string>(v, key);
    } else {
      throw ConfigError("unknown config field: " + key);
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["scenario"] = c.scenario;
  j["topology"] = net::to_string(c.topology);
  j["messages"] = c.messages;
  j["bulk"] = c.bulk;
  j["independent_encryption"] = c.independent_encryption;
  j["fresh_aik_per_push"] = c.fresh_aik_per_push;
  j["aik_prefetch"] = c.aik_prefetch;
  j["tamper_after"] = c.tamper_after ? nlohmann::ordered_json(*c.tamper_after) : nullptr;
  j["tamper_pcr"] = c.tamper_pcr;
  j["noc_down_after"] = c.noc_down_after ? nlohmann::ordered_json(*c.noc_down_after) : nullptr;
  j["noc_malicious_markers"] = c.noc_malicious_markers;
  j["cost_overrides"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.cost_overrides) j["cost_overrides"][k] = v;
  j["seed"] = c.seed;
  j["key_scheme"] = crypto::to_string(c.key_scheme);
  j["seal_selection"] = c.seal_selection;
  j["extra_boot_components"] = nlohmann::ordered_json::array();
  for (const auto& e : c.extra_boot_components) {
    j["extra_boot_components"].push_back({{"pcr", e.pcr}, {"name", e.name}, {"code", e.code}});
  }
  j["whitelist"] = nlohmann::ordered_json::array();
  for (const auto& e : c.whitelist) {
    j["whitelist"].push_back({{"name", e.name}, {"code", e.code}});
  }
  j["pull_mode"] = c.pull_mode;
  j["transcript"] = c.transcript_path;
  j["report"] = c.report_path;
  j["noc_dump"] = c.noc_dump_path;
  j["keystore"] = c.keystore_path;
  return j.dump(2);
}

}  // namespace pushsim::cli

#include "rugscan/events.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "json.hpp"

namespace rugscan {

using json = nlohmann::json;
using bigfloat = boost::multiprecision::cpp_bin_float_50;

size_t EventWindow::transfer_count() const {
  size_t n = 0;
  for (const auto& e : events)
    if (e.kind == EventKind::Transfer) ++n;
  return n;
}

EventWindow select_window(std::vector<TransferEvent> events, size_t n) {
  std::stable_sort(events.begin(), events.end(), event_order);

  int64_t last_transfer_ts = 0;
  size_t transfers = 0;
  for (const auto& e : events) {
    if (e.kind != EventKind::Transfer) continue;
    if (transfers == n) break;
    ++transfers;
    last_transfer_ts = e.timestamp;
  }
  if (transfers == 0) throw input_error("no transactions");

  EventWindow w;
  size_t taken = 0;
  for (const auto& e : events) {
    if (e.kind == EventKind::Transfer) {
      if (taken == transfers) break;
      ++taken;
      w.events.push_back(e);
    } else if (e.timestamp <= last_transfer_ts) {
      w.events.push_back(e);
    }
  }
  return w;
}

double normalize_value(const bigint& value, unsigned decimals) {
  if (value < 0) throw input_error("negative transfer value");
  bigint scale = 1;
  for (unsigned i = 0; i < decimals; ++i) scale *= 10;
  bigfloat scaled = bigfloat(value) / bigfloat(scale);
  return std::log1p(scaled.convert_to<double>());
}

namespace {

// Field-checked accessors so malformed bundles fail with the field name.
const json& need(const json& j, const char* field, const char* where) {
  auto it = j.find(field);
  if (it == j.end())
    throw input_error(std::string(where) + ": missing field '" + field + "'");
  return *it;
}

std::string need_str(const json& j, const char* field, const char* where) {
  const json& v = need(j, field, where);
  if (!v.is_string())
    throw input_error(std::string(where) + ": field '" + field + "' must be a string");
  return v.get<std::string>();
}

int64_t need_int(const json& j, const char* field, const char* where) {
  const json& v = need(j, field, where);
  if (!v.is_number_integer())
    throw input_error(std::string(where) + ": field '" + field + "' must be an integer");
  return v.get<int64_t>();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

bigint parse_bigint(const std::string& s, const char* where) {
  if (s.empty()) throw input_error(std::string(where) + ": empty value");
  try {
    return bigint(s);
  } catch (const std::exception&) {
    throw input_error(std::string(where) + ": bad integer '" + s + "'");
  }
}

}  // namespace

TokenDescriptor load_token_json(const std::string& path) {
  json j = read_json_file(path);
  TokenDescriptor t;
  t.address = normalize_address(need_str(j, "address", "token.json"));
  int64_t dec = need_int(j, "decimals", "token.json");
  if (dec < 0 || dec > 77) throw input_error("token.json: decimals out of range");
  t.decimals = static_cast<unsigned>(dec);
  t.creator = normalize_address(need_str(j, "creator", "token.json"));
  t.creation_timestamp = need_int(j, "creation_timestamp", "token.json");
  if (t.creation_timestamp <= 0)
    throw input_error("token.json: creation_timestamp must be positive");
  t.bytecode = parse_hex(need_str(j, "bytecode", "token.json"));
  return t;
}

std::vector<TransferEvent> load_events_json(const std::string& path) {
  json j = read_json_file(path);
  if (!j.is_array()) throw input_error(path + ": expected an array");
  std::vector<TransferEvent> out;
  std::set<std::pair<std::string, int32_t>> seen;
  for (size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    std::string where = "events.json[" + std::to_string(i) + "]";
    TransferEvent ev;
    ev.tx_hash = need_str(e, "tx_hash", where.c_str());
    ev.log_index = static_cast<int32_t>(need_int(e, "log_index", where.c_str()));
    ev.timestamp = need_int(e, "timestamp", where.c_str());
    ev.from = normalize_address(need_str(e, "from", where.c_str()));
    ev.to = normalize_address(need_str(e, "to", where.c_str()));
    ev.value = parse_bigint(need_str(e, "value", where.c_str()), where.c_str());
    if (ev.value < 0) throw input_error(where + ": negative value");
    int64_t gas = need_int(e, "gas_limit", where.c_str());
    if (gas < 0) throw input_error(where + ": negative gas_limit");
    ev.gas_limit = static_cast<uint64_t>(gas);
    std::string kind = need_str(e, "kind", where.c_str());
    if (kind == "transfer") {
      ev.kind = EventKind::Transfer;
    } else if (kind == "approval") {
      ev.kind = EventKind::Approval;
    } else {
      throw input_error(where + ": unknown kind '" + kind + "'");
    }
    if (!seen.emplace(ev.tx_hash, ev.log_index).second)
      throw input_error(where + ": duplicate (tx_hash, log_index)");
    out.push_back(std::move(ev));
  }
  return out;
}

void save_token_json(const std::string& path, const TokenDescriptor& token) {
  json j;
  j["address"] = token.address;
  j["decimals"] = token.decimals;
  j["creator"] = token.creator;
  j["creation_timestamp"] = token.creation_timestamp;
  j["bytecode"] = to_hex(token.bytecode);
  write_json_file(path, j);
}

void save_events_json(const std::string& path, const std::vector<TransferEvent>& events) {
  json arr = json::array();
  for (const auto& e : events) {
    json je;
    je["tx_hash"] = e.tx_hash;
    je["log_index"] = e.log_index;
    je["timestamp"] = e.timestamp;
    je["from"] = e.from;
    je["to"] = e.to;
    je["value"] = e.value.str();
    je["gas_limit"] = e.gas_limit;
    je["kind"] = e.kind == EventKind::Transfer ? "transfer" : "approval";
    arr.push_back(std::move(je));
  }
  write_json_file(path, arr);
}

TokenBundle load_bundle(const std::string& dir) {
  TokenBundle b;
  b.token = load_token_json(dir + "/token.json");
  b.events = load_events_json(dir + "/events.json");
  for (size_t i = 0; i < b.events.size(); ++i)
    if (b.events[i].timestamp < b.token.creation_timestamp)
      throw input_error("events.json[" + std::to_string(i) +
                        "]: timestamp precedes token creation");
  return b;
}

void save_bundle(const std::string& dir, const TokenBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw input_error("cannot create bundle directory " + dir + ": " + ec.message());
  save_token_json(dir + "/token.json", bundle.token);
  save_events_json(dir + "/events.json", bundle.events);
}

}  // namespace rugscan

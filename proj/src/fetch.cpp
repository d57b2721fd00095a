#include "rugscan/fetch.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "rugscan/facts.hpp"

namespace rugscan {

namespace {

using json = nlohmann::json;

// Backoff schedule: 250ms, 500ms, 1s, ... capped so a stuck endpoint cannot
// stall a sweep for long.
constexpr int kBackoffBaseMs = 250;
constexpr int kBackoffCapMs = 2000;

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading path, "" when the URL has none
};

Endpoint split_url(const std::string& url) {
  bool http = url.rfind("http://", 0) == 0;
  bool https = url.rfind("https://", 0) == 0;
  if (!http && !https)
    throw config_error("unsupported endpoint URL '" + url + "' (expected http:// or https://)");
  size_t host_start = url.find("://") + 3;
  if (host_start >= url.size()) throw config_error("endpoint URL '" + url + "' has no host");
  size_t slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  return {url.substr(0, slash), url.substr(slash)};
}

// True when a 200 body is the explorer's way of asking us to slow down.
bool rate_limited_body(const std::string& body) {
  json r = json::parse(body, nullptr, false);
  if (r.is_discarded() || !r.is_object()) return false;
  std::string text = r.value("message", "");
  auto it = r.find("result");
  if (it != r.end() && it->is_string()) text += " " + it->get<std::string>();
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return text.find("rate limit") != std::string::npos;
}

// One endpoint with retry, throttling and timeouts applied uniformly.
class Http {
 public:
  Http(const std::string& url, const FetchConfig& cfg, FetchStats* stats)
      : ep_(split_url(url)), cli_(ep_.base), cfg_(cfg), stats_(stats) {
    cli_.set_connection_timeout(cfg.timeout_seconds, 0);
    cli_.set_read_timeout(cfg.timeout_seconds, 0);
    cli_.set_write_timeout(cfg.timeout_seconds, 0);
  }

  std::string get(const std::string& query, bool check_rate_limit) {
    std::string target = (ep_.path.empty() ? std::string() : ep_.path) + query;
    if (target.empty() || target[0] != '/') target = "/" + target;
    return round_trip("GET " + ep_.base,
                      [&](httplib::Client& c) { return c.Get(target); },
                      check_rate_limit);
  }

  std::string post_json(const std::string& body) {
    std::string target = ep_.path.empty() ? "/" : ep_.path;
    return round_trip(
        "POST " + ep_.base,
        [&](httplib::Client& c) { return c.Post(target, body, "application/json"); },
        false);
  }

 private:
  std::string round_trip(const std::string& what,
                         const std::function<httplib::Result(httplib::Client&)>& issue,
                         bool check_rate_limit) {
    std::string last = "no attempt made";
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      if (attempt == 1) {
        if (cfg_.throttle_ms > 0)
          std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.throttle_ms));
      } else {
        int ms = std::min(kBackoffCapMs, kBackoffBaseMs << (attempt - 2));
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
      }
      if (stats_) ++stats_->requests;
      httplib::Result res = issue(cli_);
      if (!res) {
        last = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw input_error(what + ": HTTP " + std::to_string(res->status));
      if (check_rate_limit && rate_limited_body(res->body)) {
        last = "rate limited";
        continue;
      }
      return res->body;
    }
    throw input_error(what + " failed after " + std::to_string(cfg_.max_attempts) +
                      " attempts (" + last + ")");
  }

  Endpoint ep_;
  httplib::Client cli_;
  const FetchConfig& cfg_;
  FetchStats* stats_;
};

json parse_body(const std::string& body, const std::string& what) {
  json r = json::parse(body, nullptr, false);
  if (r.is_discarded() || !r.is_object())
    throw input_error(what + ": response is not a JSON object");
  return r;
}

// Explorer numbers arrive as decimal strings ("1699999999"), occasionally as
// plain JSON numbers. Accept both; anything else names the field.
int64_t field_i64(const json& row, const char* field, const std::string& where) {
  auto it = row.find(field);
  if (it == row.end()) throw input_error(where + ": missing field '" + field + "'");
  if (it->is_number_integer()) return it->get<int64_t>();
  if (it->is_string()) {
    try {
      size_t pos = 0;
      int64_t v = std::stoll(it->get<std::string>(), &pos);
      if (pos == it->get<std::string>().size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw input_error(where + ": field '" + field + "' is not an integer");
}

int64_t field_i64_opt(const json& row, const char* field, const std::string& where,
                      int64_t fallback) {
  return row.contains(field) ? field_i64(row, field, where) : fallback;
}

std::string field_str(const json& row, const char* field, const std::string& where) {
  auto it = row.find(field);
  if (it == row.end()) throw input_error(where + ": missing field '" + field + "'");
  if (!it->is_string()) throw input_error(where + ": field '" + field + "' must be a string");
  return it->get<std::string>();
}

bigint field_big(const json& row, const char* field, const std::string& where) {
  std::string s = field_str(row, field, where);
  try {
    return bigint(s);
  } catch (const std::exception&) {
    throw input_error(where + ": field '" + field + "' is not an integer");
  }
}

TransferEvent row_event(const json& row, const std::string& where) {
  if (!row.is_object()) throw input_error(where + ": expected an object");
  TransferEvent ev;
  ev.tx_hash = field_str(row, "hash", where);
  ev.log_index = static_cast<int32_t>(field_i64(row, "logIndex", where));
  ev.timestamp = field_i64(row, "timeStamp", where);
  ev.from = normalize_address(field_str(row, "from", where));
  ev.to = normalize_address(field_str(row, "to", where));
  ev.value = field_big(row, "value", where);
  if (ev.value < 0) throw input_error(where + ": negative value");
  int64_t gas = field_i64_opt(row, "gas", where, 0);
  if (gas < 0) throw input_error(where + ": negative gas");
  ev.gas_limit = static_cast<uint64_t>(gas);
  if (row.contains("kind")) {
    std::string kind = field_str(row, "kind", where);
    if (kind == "transfer") {
      ev.kind = EventKind::Transfer;
    } else if (kind == "approval") {
      ev.kind = EventKind::Approval;
    } else {
      throw input_error(where + ": unknown kind '" + kind + "'");
    }
  }
  return ev;
}

// Unwraps the {"status", "message", "result"} envelope. An array result is
// data (possibly empty); a string result is the explorer reporting an error.
const json& explorer_rows(const json& r, const std::string& what) {
  auto it = r.find("result");
  if (it == r.end()) throw input_error(what + ": missing field 'result'");
  if (it->is_array()) return *it;
  std::string msg = r.value("message", "explorer error");
  if (it->is_string()) msg += ": " + it->get<std::string>();
  throw input_error(what + ": " + msg);
}

std::string api_key_suffix(const FetchConfig& cfg) {
  if (cfg.api_key_env.empty()) return "";
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') return "";
  return std::string("&apikey=") + key;
}

Bytes fetch_code(Http& rpc, const std::string& address) {
  json req = {{"jsonrpc", "2.0"},
              {"id", 1},
              {"method", "eth_getCode"},
              {"params", {address, "latest"}}};
  json r = parse_body(rpc.post_json(req.dump()), "eth_getCode");
  if (r.contains("error")) {
    std::string msg = r["error"].is_object() ? r["error"].value("message", "unknown error")
                                             : r["error"].dump();
    throw input_error("eth_getCode: " + msg);
  }
  auto it = r.find("result");
  if (it == r.end() || !it->is_string())
    throw input_error("eth_getCode: missing string field 'result'");
  std::string code = it->get<std::string>();
  if (code == "0x" || code == "0X" || code.empty())
    throw input_error("not a contract: " + address);
  return parse_hex(code);
}

}  // namespace

TokenBundle fetch_token(const std::string& address_in, const FetchConfig& cfg, bool offline,
                        FetchStats* stats) {
  if (stats) *stats = FetchStats{};
  std::string address = normalize_address(address_in);
  std::string dir = cfg.cache_dir + "/" + address;

  // A complete cache entry (both files present) short-circuits everything.
  namespace fs = std::filesystem;
  if (fs::exists(dir + "/token.json") && fs::exists(dir + "/events.json")) {
    if (stats) stats->from_cache = true;
    return load_bundle(dir);
  }
  if (offline) throw input_error("offline mode and no cached bundle for " + address);
  if (cfg.rpc_url.empty()) throw config_error("fetch.rpc_url is not configured");
  if (cfg.explorer_url.empty()) throw config_error("fetch.explorer_url is not configured");

  Http rpc(cfg.rpc_url, cfg, stats);
  Http explorer(cfg.explorer_url, cfg, stats);
  std::string key = api_key_suffix(cfg);

  TokenBundle b;
  b.token.address = address;
  b.token.bytecode = fetch_code(rpc, address);

  // Event pages, ascending. A short page ends the harvest; max_pages bounds
  // tokens with endless histories (the analysis window only needs the
  // earliest events anyway).
  std::set<std::pair<std::string, int32_t>> seen;
  bool have_decimals = false;
  for (int page = 1; page <= cfg.max_pages; ++page) {
    std::string query = "?module=account&action=tokentx&contractaddress=" + address +
                        "&page=" + std::to_string(page) +
                        "&offset=" + std::to_string(cfg.page_size) + "&sort=asc" + key;
    json r = parse_body(explorer.get(query, true), "tokentx");
    const json& rows = explorer_rows(r, "tokentx");
    if (stats) ++stats->pages;
    for (size_t i = 0; i < rows.size(); ++i) {
      std::string where = "tokentx page " + std::to_string(page) + " row " + std::to_string(i);
      TransferEvent ev = row_event(rows[i], where);
      if (!seen.emplace(ev.tx_hash, ev.log_index).second) {
        if (stats) ++stats->duplicates;
        continue;
      }
      if (!have_decimals && rows[i].contains("tokenDecimal")) {
        int64_t dec = field_i64(rows[i], "tokenDecimal", where);
        if (dec < 0 || dec > 77) throw input_error(where + ": tokenDecimal out of range");
        b.token.decimals = static_cast<unsigned>(dec);
        have_decimals = true;
      }
      b.events.push_back(std::move(ev));
    }
    if (rows.size() < static_cast<size_t>(cfg.page_size)) break;
  }
  std::stable_sort(b.events.begin(), b.events.end(), event_order);

  // Creator lookup is best effort: explorers that cannot answer leave the
  // zero address and the earliest event timestamp in place.
  b.token.creator = "0x" + std::string(40, '0');
  int64_t created = 0;
  {
    std::string query = "?module=contract&action=getcontractcreation&contractaddresses=" +
                        address + key;
    json r = parse_body(explorer.get(query, true), "getcontractcreation");
    auto it = r.find("result");
    if (it != r.end() && it->is_array() && !it->empty() && (*it)[0].is_object()) {
      const json& row = (*it)[0];
      if (row.contains("contractCreator"))
        b.token.creator = normalize_address(field_str(row, "contractCreator", "getcontractcreation"));
      created = field_i64_opt(row, "timestamp", "getcontractcreation", 0);
    }
  }
  int64_t earliest = b.events.empty() ? 0 : b.events.front().timestamp;
  if (created <= 0) created = earliest;
  // Explorers occasionally disagree about block timestamps; clamp so the
  // bundle stays self-consistent (no event may precede creation).
  if (earliest > 0 && created > earliest) created = earliest;
  if (created <= 0) created = 1;
  b.token.creation_timestamp = created;

  save_bundle(dir, b);
  return b;
}

bool looks_like_erc20(const Bytes& code) {
  static constexpr uint32_t kSelectors[] = {kSelTransfer,   kSelTransferFrom, kSelApprove,
                                            kSelBalanceOf,  kSelTotalSupply,  kSelAllowance};
  for (uint32_t sel : kSelectors) {
    uint8_t pat[5] = {0x63,  // PUSH4
                      static_cast<uint8_t>(sel >> 24), static_cast<uint8_t>(sel >> 16),
                      static_cast<uint8_t>(sel >> 8), static_cast<uint8_t>(sel)};
    if (std::search(code.begin(), code.end(), pat, pat + 5) == code.end()) return false;
  }
  return true;
}

}  // namespace rugscan

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "rugscan/fetch.hpp"
#include "rugscan/token_builder.hpp"

using namespace rugscan;
using json = nlohmann::json;

namespace {

std::string addr(unsigned n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "0x%040x", n);
  return buf;
}

std::string txh(unsigned n) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "0x%064x", n);
  return buf;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("rugscan_fetch_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Etherscan-style explorer row. Field values go out as decimal strings, the
// way real explorers serialize them.
json row(unsigned tx, int log, int64_t ts, const char* kind = nullptr) {
  json r = {{"hash", txh(tx)},
            {"logIndex", std::to_string(log)},
            {"timeStamp", std::to_string(ts)},
            {"from", addr(10)},
            {"to", addr(11)},
            {"value", "1000000"},
            {"gas", "60000"},
            {"tokenDecimal", "6"}};
  if (kind) r["kind"] = kind;
  return r;
}

// In-process stand-in for the RPC node and the explorer. One instance per
// test case; knobs select the failure mode under test.
struct ServerDouble {
  httplib::Server server;
  std::thread runner;
  int port = 0;

  std::string code_hex;                  // eth_getCode answer, "0x" = no contract
  std::vector<json> pages;               // tokentx pages, served in order
  json creation = json::array();         // getcontractcreation result
  std::atomic<int> rpc_calls{0};
  std::atomic<int> tokentx_calls{0};
  std::atomic<int> fail_next{0};         // respond 503 to this many requests
  std::atomic<int> rate_limit_next{0};   // status-0 rate limit bodies first
  std::string last_tokentx_query;

  ServerDouble() {
    server.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
      ++rpc_calls;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      json body = json::parse(req.body);
      REQUIRE(body["method"] == "eth_getCode");
      res.set_content(json{{"jsonrpc", "2.0"}, {"id", 1}, {"result", code_hex}}.dump(),
                      "application/json");
    });
    server.Get("/api", [this](const httplib::Request& req, httplib::Response& res) {
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        return;
      }
      std::string action = req.get_param_value("action");
      json out;
      if (action == "tokentx") {
        ++tokentx_calls;
        last_tokentx_query = req.target;
        if (rate_limit_next > 0) {
          --rate_limit_next;
          out = {{"status", "0"}, {"message", "NOTOK"}, {"result", "Max rate limit reached"}};
        } else {
          size_t page = std::stoul(req.get_param_value("page"));
          json rows = page <= pages.size() ? pages[page - 1] : json::array();
          out = {{"status", rows.empty() ? "0" : "1"}, {"message", "OK"}, {"result", rows}};
        }
      } else if (action == "getcontractcreation") {
        out = {{"status", creation.empty() ? "0" : "1"}, {"message", "OK"}, {"result", creation}};
      } else {
        out = {{"status", "0"}, {"message", "NOTOK"}, {"result", "unknown action"}};
      }
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    runner = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~ServerDouble() {
    server.stop();
    runner.join();
  }

  FetchConfig config(const TempDir& tmp) const {
    FetchConfig cfg;
    cfg.rpc_url = "http://127.0.0.1:" + std::to_string(port) + "/rpc";
    cfg.explorer_url = "http://127.0.0.1:" + std::to_string(port) + "/api";
    cfg.cache_dir = (tmp.path / "cache").string();
    cfg.timeout_seconds = 5;
    cfg.page_size = 3;
    return cfg;
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("fetch assembles a bundle from code, paged events and creation info") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x6001600101";
  // Three pages, the middle one overlapping the first by one row, the last
  // one short. One approval rides along.
  srv.pages = {
      json::array({row(1, 0, 1000), row(2, 0, 1010), row(3, 0, 1020)}),
      json::array({row(3, 0, 1020), row(4, 0, 1030, "approval"), row(5, 0, 1040)}),
      json::array({row(6, 1, 1050)}),
  };
  srv.creation = json::array({{{"contractAddress", addr(7)},
                               {"contractCreator", addr(9)},
                               {"timestamp", "900"}}});

  FetchStats stats;
  TokenBundle b = fetch_token(addr(7), srv.config(tmp), false, &stats);

  CHECK(b.token.address == addr(7));
  CHECK(b.token.bytecode == Bytes({0x60, 0x01, 0x60, 0x01, 0x01}));
  CHECK(b.token.decimals == 6);
  CHECK(b.token.creator == addr(9));
  CHECK(b.token.creation_timestamp == 900);
  REQUIRE(b.events.size() == 6);
  CHECK(b.events.front().timestamp == 1000);
  CHECK(b.events.back().timestamp == 1050);
  CHECK(b.events[3].kind == EventKind::Approval);
  CHECK(b.events[5].log_index == 1);
  CHECK(b.events[0].value == bigint(1000000));
  CHECK(b.events[0].gas_limit == 60000);

  CHECK_FALSE(stats.from_cache);
  CHECK(stats.pages == 3);
  CHECK(stats.duplicates == 1);
  // One getCode, three pages, one creation lookup; no retries.
  CHECK(stats.requests == 5);
  CHECK(srv.last_tokentx_query.find("sort=asc") != std::string::npos);
  CHECK(srv.last_tokentx_query.find("offset=3") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.path / "cache" / addr(7) / "token.json"));
  CHECK(std::filesystem::exists(tmp.path / "cache" / addr(7) / "events.json"));
}

TEST_CASE("an address without code is not a contract") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x";
  try {
    fetch_token(addr(7), srv.config(tmp), false, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("not a contract") != std::string::npos);
  }
  // Nothing half-fetched may end up in the cache.
  CHECK_FALSE(std::filesystem::exists(tmp.path / "cache" / addr(7)));
}

TEST_CASE("transient server failures are retried with backoff") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  srv.pages = {json::array({row(1, 0, 1000)})};
  srv.fail_next = 2;  // getCode fails twice, succeeds on the third attempt

  FetchStats stats;
  TokenBundle b = fetch_token(addr(7), srv.config(tmp), false, &stats);
  CHECK(b.events.size() == 1);
  CHECK(srv.rpc_calls == 3);
  CHECK(stats.requests == 5);  // 3 getCode attempts + tokentx + creation
}

TEST_CASE("retries are bounded and the failure is typed as input") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  srv.fail_next = 1000;

  try {
    fetch_token(addr(7), srv.config(tmp), false, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("after 3 attempts") != std::string::npos);
  }
  CHECK(srv.rpc_calls == 3);
}

TEST_CASE("rate limited explorer bodies count as retryable") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  srv.pages = {json::array({row(1, 0, 1000)})};
  srv.rate_limit_next = 1;

  TokenBundle b = fetch_token(addr(7), srv.config(tmp), false, nullptr);
  CHECK(b.events.size() == 1);
  CHECK(srv.tokentx_calls == 2);
}

TEST_CASE("the cache is authoritative and byte stable") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x6001600101";
  srv.pages = {json::array({row(1, 0, 1000), row(2, 3, 1005)})};
  srv.creation = json::array({{{"contractCreator", addr(9)}, {"timestamp", "990"}}});
  FetchConfig cfg = srv.config(tmp);

  TokenBundle first = fetch_token(addr(7), cfg, false, nullptr);
  int rpc_after_first = srv.rpc_calls;
  std::filesystem::path dir = tmp.path / "cache" / addr(7);
  std::string token_bytes = slurp(dir / "token.json");
  std::string events_bytes = slurp(dir / "events.json");

  // Second fetch: served from cache, even though the server is reachable.
  FetchStats stats;
  TokenBundle second = fetch_token(addr(7), cfg, false, &stats);
  CHECK(stats.from_cache);
  CHECK(stats.requests == 0);
  CHECK(srv.rpc_calls == rpc_after_first);
  CHECK(second.token.bytecode == first.token.bytecode);
  CHECK(second.events.size() == first.events.size());

  // Offline mode happily reads the cache too.
  TokenBundle offline = fetch_token(addr(7), cfg, true, &stats);
  CHECK(stats.from_cache);
  CHECK(offline.token.creator == addr(9));

  // Round-tripping the loaded bundle through save produces identical bytes.
  std::filesystem::path dir2 = tmp.path / "resaved";
  save_bundle(dir2.string(), second);
  CHECK(slurp(dir2 / "token.json") == token_bytes);
  CHECK(slurp(dir2 / "events.json") == events_bytes);
}

TEST_CASE("offline with a cold cache refuses to run") {
  ServerDouble srv;
  TempDir tmp;
  try {
    fetch_token(addr(7), srv.config(tmp), true, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("offline") != std::string::npos);
  }
  CHECK(srv.rpc_calls == 0);
}

TEST_CASE("tokens with no events still produce a loadable bundle") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  // No pages, no creation info: everything falls back.
  TokenBundle b = fetch_token(addr(7), srv.config(tmp), false, nullptr);
  CHECK(b.events.empty());
  CHECK(b.token.creator == addr(0));
  CHECK(b.token.creation_timestamp == 1);
  TokenBundle reloaded = load_bundle((tmp.path / "cache" / addr(7)).string());
  CHECK(reloaded.events.empty());
}

TEST_CASE("malformed explorer rows name the offending field") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  json bad = row(1, 0, 1000);
  bad.erase("logIndex");
  srv.pages = {json::array({bad})};
  try {
    fetch_token(addr(7), srv.config(tmp), false, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("logIndex") != std::string::npos);
  }
}

TEST_CASE("the api key env var is appended to explorer queries") {
  ServerDouble srv;
  TempDir tmp;
  srv.code_hex = "0x60016001";
  srv.pages = {json::array({row(1, 0, 1000)})};
  FetchConfig cfg = srv.config(tmp);
  cfg.api_key_env = "RUGSCAN_FETCH_TEST_KEY";

  setenv("RUGSCAN_FETCH_TEST_KEY", "sekrit", 1);
  fetch_token(addr(7), cfg, false, nullptr);
  unsetenv("RUGSCAN_FETCH_TEST_KEY");
  CHECK(srv.last_tokentx_query.find("apikey=sekrit") != std::string::npos);

  // And with the variable unset nothing leaks into the query.
  std::filesystem::remove_all(tmp.path / "cache");
  fetch_token(addr(7), cfg, false, nullptr);
  CHECK(srv.last_tokentx_query.find("apikey") == std::string::npos);
}

TEST_CASE("the erc20 screen checks all six selectors") {
  CHECK(looks_like_erc20(benign_erc20()));

  // The slim fixture omits approve/allowance/transferFrom on purpose.
  CHECK_FALSE(looks_like_erc20(risk_fixture(Risk::AR)));
  CHECK_FALSE(looks_like_erc20(Bytes{}));
}

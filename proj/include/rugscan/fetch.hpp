#pragma once

#include <cstddef>
#include <string>

#include "rugscan/config.hpp"
#include "rugscan/events.hpp"

namespace rugscan {

// Bookkeeping from one fetch_token call, mostly for CLI output and tests.
struct FetchStats {
  bool from_cache = false;  // bundle served from cache_dir, no network touched
  size_t requests = 0;      // HTTP round trips issued, retries included
  size_t pages = 0;         // explorer event pages consumed
  size_t duplicates = 0;    // rows dropped by (tx_hash, log_index) dedup
};

// Pulls everything a scan needs for one token and caches it as a bundle
// directory under cfg.cache_dir/<address>/. A complete cache entry is
// authoritative: it is loaded as-is and the network is never touched again,
// which is what makes large sweeps resumable.
//
// Network protocol, when the cache misses and offline is false:
//   - bytecode      POST cfg.rpc_url, JSON-RPC eth_getCode [address, "latest"].
//                   Empty code means the address is not a contract (Input).
//   - events        GET cfg.explorer_url with Etherscan-style query strings,
//                   module=account&action=tokentx, paged ascending until a
//                   short page (or cfg.max_pages). Rows carry hash, logIndex,
//                   timeStamp, from, to, value and optionally gas,
//                   tokenDecimal and kind ("transfer"/"approval").
//   - creator       module=contract&action=getcontractcreation. Optional;
//                   missing data falls back to the zero address and the
//                   earliest event timestamp.
//
// Pages can shift between requests, so rows are deduplicated by
// (tx_hash, log_index) and sorted into canonical event order before the
// bundle is written. Each request is retried up to cfg.max_attempts times
// with capped exponential backoff; transport errors, HTTP 429/5xx and
// explorer rate-limit bodies count as retryable. If an API key env var
// (cfg.api_key_env) is set, its value is appended to explorer queries.
//
// Errors: malformed address, a cache miss in offline mode, a non-contract
// address, malformed responses and exhausted retries all throw Input.
// Missing endpoint URLs when the network is needed throw Config.
TokenBundle fetch_token(const std::string& address, const FetchConfig& cfg,
                        bool offline = false, FetchStats* stats = nullptr);

// Cheap pre-screen used by sweeps: true when the bytecode pushes all six
// core selectors (transfer, transferFrom, approve, balanceOf, totalSupply,
// allowance) somewhere, i.e. contains each PUSH4 <selector> byte pattern.
// Deliberately syntactic; the real analysis decides what the code does.
bool looks_like_erc20(const Bytes& code);

}  // namespace rugscan

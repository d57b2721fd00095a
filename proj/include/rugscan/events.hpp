#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rugscan/common.hpp"

namespace rugscan {

struct TokenDescriptor {
  std::string address;          // 0x + 40 hex
  unsigned decimals = 18;       // <= 77 so 10^decimals fits 256-bit math
  std::string creator;
  int64_t creation_timestamp = 0;
  Bytes bytecode;
};

enum class EventKind : uint8_t { Transfer = 0, Approval };

struct TransferEvent {
  std::string tx_hash;  // 0x + 64 hex
  int32_t log_index = 0;
  int64_t timestamp = 0;
  std::string from;
  std::string to;
  bigint value;  // raw token units, arbitrary precision
  uint64_t gas_limit = 0;
  EventKind kind = EventKind::Transfer;
};

// Canonical event order used everywhere downstream.
inline bool event_order(const TransferEvent& a, const TransferEvent& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.tx_hash != b.tx_hash) return a.tx_hash < b.tx_hash;
  return a.log_index < b.log_index;
}

struct EventWindow {
  std::vector<TransferEvent> events;  // sorted by event_order

  size_t transfer_count() const;
};

struct TokenBundle {
  TokenDescriptor token;
  std::vector<TransferEvent> events;
};

// The earliest `n` transfer events plus approvals no later than the last
// retained transfer. Throws Input when the set has no transfers at all.
EventWindow select_window(std::vector<TransferEvent> events, size_t n = 500);

// ln(1 + value / 10^decimals), the division done in arbitrary precision.
double normalize_value(const bigint& value, unsigned decimals);

// Bundle fixture IO. A bundle directory holds token.json and events.json.
TokenBundle load_bundle(const std::string& dir);
void save_bundle(const std::string& dir, const TokenBundle& bundle);

// Single-file variants used by the fetcher's cache.
TokenDescriptor load_token_json(const std::string& path);
std::vector<TransferEvent> load_events_json(const std::string& path);
void save_token_json(const std::string& path, const TokenDescriptor& token);
void save_events_json(const std::string& path, const std::vector<TransferEvent>& events);

}  // namespace rugscan

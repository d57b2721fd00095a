#pragma once

#include <map>
#include <set>
#include <vector>

#include "rugscan/scg.hpp"

namespace rugscan {

// topic0 of the canonical ERC-20 Transfer(address,address,uint256) event.
extern const u256 kTransferTopic;

// ERC-20 selectors the engine treats specially.
constexpr uint32_t kSelTransfer = 0xa9059cbb;
constexpr uint32_t kSelTransferFrom = 0x23b872dd;
constexpr uint32_t kSelApprove = 0x095ea7b3;
constexpr uint32_t kSelBalanceOf = 0x70a08231;
constexpr uint32_t kSelTotalSupply = 0x18160ddd;
constexpr uint32_t kSelAllowance = 0xdd62ed3e;

// A storage slot expression resolved to its root: either a plain scalar slot
// or a mapping access keccak(key . base), possibly nested (nested accesses
// resolve to the outermost key and the innermost base).
struct StorageRef {
  enum class Kind { Scalar, Mapping, Unknown };
  Kind kind = Kind::Unknown;
  u256 base = 0;
  Vid key = kNoVid;  // outermost mapping key word
};

StorageRef classify_slot(const CodeGraph& g, Vid slot);

struct FunctionFacts {
  uint32_t selector = 0;
  int32_t entry = -1;
  std::set<int32_t> blocks;       // reachable from entry; helpers may be shared
  std::vector<Vid> args;          // CallArg values loaded in f (offset >= 4)
  std::vector<Vid> amount_args;   // args treated as the transfer amount
  std::vector<Vid> address_args;  // args treated as addresses
  bool transfer_like = false;     // PTF
  bool privileged = false;        // every state write sits behind an owner guard
  bool has_sstore = false;
  std::set<int32_t> guard_blocks;
};

// Materialized relations the rules run over. Storage facts live at the slot
// level (scalar slots / mapping bases); value-level taint is a per-vid bitmap
// closed under the expression DAG.
struct Facts {
  std::map<uint32_t, FunctionFacts> fns;
  std::set<u256> pumv;          // scalar slots written only by privileged fns
  std::set<u256> pumd;          // mapping bases written only by privileged fns
  std::set<u256> balance_maps;  // bases read-modify-written inside transfer fns
  std::set<u256> supply_slots;  // scalar slots behind totalSupply()
  std::set<u256> seed_scalars;  // taint seeds: pumv
  std::set<u256> seed_maps;     // taint seeds: pumd minus balance bookkeeping
  std::vector<char> tainted;    // by vid

  bool is_tainted(Vid v) const { return v < tainted.size() && tainted[v] != 0; }
};

Facts derive_base_facts(const CodeGraph& g);

// True if v's expression DAG contains any vid from `set`.
bool derives_from_set(const CodeGraph& g, Vid v, const std::set<Vid>& set);

}  // namespace rugscan

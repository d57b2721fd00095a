#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rugscan/common.hpp"
#include "rugscan/disasm.hpp"

namespace rugscan {

// Value ids index into CodeGraph::values. The value table is an expression
// DAG built by the abstract interpreter; rule matching walks it instead of
// re-deriving use-def chains from the instruction stream.
using Vid = uint32_t;
constexpr Vid kNoVid = 0xffffffffu;

// Synthetic sink block id for unresolved dynamic jumps.
constexpr int32_t kSinkBlock = -1;

enum class ValueKind : uint8_t {
  Const,        // cst holds the word
  CallArg,      // CALLDATALOAD at constant offset; cst = byte offset
  CallDataRaw,  // CALLDATALOAD at symbolic offset; a = offset vid
  Caller,
  Origin,
  SelfAddress,
  CallValue,
  CallDataSize,
  Timestamp,
  BlockNumber,
  SLoad,        // a = slot vid
  Sha3,         // ops = 32-byte preimage words in memory order (empty if opaque)
  BinOp,        // opcode; a = first popped, b = second popped
  UnOp,         // opcode; a = operand
  Nary,         // opcode; ops = all popped operands (ADDMOD, CREATE, ...)
  CallResult,   // opcode; a = call target vid
  Env,          // opcode; zero-input environment reads (GASPRICE, CHAINID, ...)
  MLoad,        // a = address vid; memory read we could not resolve
  Unknown,      // recovery placeholder
};

struct DefSite {
  int32_t block = -1;
  int32_t stmt = -1;
};

struct Value {
  ValueKind kind = ValueKind::Unknown;
  uint8_t opcode = 0;
  Vid a = kNoVid;
  Vid b = kNoVid;
  u256 cst = 0;
  std::vector<Vid> ops;
  DefSite def;
};

// One executed instruction in a block's canonical (first-visit) trace.
// `uses` holds only semantic inputs: stack plumbing (DUP/SWAP/POP) records
// none, so data-dependency edges reflect real dataflow.
struct Stmt {
  uint32_t instr = 0;  // index into the block's instruction list
  std::vector<Vid> uses;
  Vid def = kNoVid;
};

struct BasicBlock {
  int32_t id = 0;  // offset of the first instruction; kSinkBlock for the sink
  std::vector<Instruction> instructions;
  std::vector<Stmt> stmts;
  std::optional<uint32_t> function;  // owning selector, first discoverer wins
  bool has_internal_call = false;
  bool malformed = false;  // stack underflow on the canonical visit
};

// Side records collected during simulation; rule matching consumes these plus
// the value table rather than re-walking the bytecode.
struct SStoreRec {
  int32_t block = 0;
  int32_t stmt = 0;
  Vid slot = kNoVid;
  Vid value = kNoVid;
};

struct CallRec {
  int32_t block = 0;
  int32_t stmt = 0;
  uint8_t opcode = 0;
  Vid target = kNoVid;
  Vid value = kNoVid;  // kNoVid for DELEGATECALL/STATICCALL
};

struct LogRec {
  int32_t block = 0;
  int32_t stmt = 0;
  uint8_t topics = 0;
  std::vector<Vid> topic_vids;
};

struct JumpiRec {
  int32_t block = 0;
  int32_t stmt = 0;
  Vid cond = kNoVid;
  int32_t target = -2;       // -2 = unresolved
  int32_t fallthrough = -2;  // -2 = none (end of code)
};

struct LiftDiagnostics {
  uint32_t unresolved_jumps = 0;
  uint32_t invalid_jump_targets = 0;
  uint32_t unreachable_blocks_dropped = 0;
  uint32_t malformed_blocks = 0;
  uint32_t visit_cap_hits = 0;
  bool step_budget_exhausted = false;
  bool truncated_push = false;
  size_t metadata_len = 0;
};

struct LiftOptions {
  bool strip_metadata = true;
  int max_block_visits = 32;     // per-block cap on distinct abstract states
  long max_steps = 500000;       // global simulated-instruction budget
};

struct CodeGraph {
  std::map<int32_t, BasicBlock> blocks;
  std::set<std::pair<int32_t, int32_t>> cf_edges;
  std::set<std::pair<int32_t, int32_t>> dd_edges;
  std::map<uint32_t, int32_t> functions;  // selector -> entry block
  std::optional<int32_t> fallback_block;
  std::vector<Value> values;
  std::vector<SStoreRec> sstores;
  std::vector<CallRec> calls;
  std::vector<LogRec> logs;
  std::vector<JumpiRec> jumpis;
  LiftDiagnostics diag;
  bool has_sink = false;

  const Value& val(Vid v) const { return values.at(v); }
  bool has_block(int32_t id) const { return blocks.count(id) != 0; }
};

// Lifts runtime bytecode to a semantic code graph: disassembly, basic-block
// recovery, worklist constant-stack simulation (jump resolution, def-use
// facts, SHA3 operand tagging), dispatcher-based function discovery.
CodeGraph lift(const Bytes& runtime_code, const LiftOptions& opts = {});

// True if `v` transitively depends on any value satisfying `pred`
// (including v itself). Walks the expression DAG.
bool derives_from(const CodeGraph& g, Vid v, const std::function<bool(const Value&)>& pred);

}  // namespace rugscan

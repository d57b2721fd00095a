#include "rugscan/scg.hpp"

#include <deque>
#include <algorithm>

namespace rugscan {

namespace {

// Word-granular abstract memory keyed by constant byte offset. Symbolic
// writes clobber everything; that is crude but matches how solc lays out
// scratch space for hashing (MSTORE at 0x00/0x20 then SHA3(0, 0x40)).
using AbstractMemory = std::map<u256, Vid>;

struct PathState {
  int32_t block = 0;
  std::vector<Vid> stack;
  AbstractMemory memory;
};

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

uint64_t hash_u256(const u256& x) {
  uint64_t h = 0;
  u256 v = x;
  for (int i = 0; i < 4; ++i) {
    h = mix(h, static_cast<uint64_t>(v & 0xffffffffffffffffull));
    v >>= 64;
  }
  return h;
}

struct Sim {
  CodeGraph& g;
  const LiftOptions& opts;
  std::map<int32_t, std::set<uint64_t>> seen;
  std::set<int32_t> visited;
  std::deque<PathState> queue;
  std::set<std::pair<int32_t, int32_t>> unresolved_sites;
  long steps = 0;
  int32_t last_dispatch_fallthrough = -2;

  Sim(CodeGraph& graph, const LiftOptions& options) : g(graph), opts(options) {}

  Vid add(Value v) {
    g.values.push_back(std::move(v));
    return static_cast<Vid>(g.values.size() - 1);
  }

  Vid make(ValueKind kind, DefSite def, uint8_t opcode = 0, Vid a = kNoVid, Vid b = kNoVid,
           u256 cst = 0, std::vector<Vid> ops = {}) {
    Value v;
    v.kind = kind;
    v.opcode = opcode;
    v.a = a;
    v.b = b;
    v.cst = std::move(cst);
    v.ops = std::move(ops);
    v.def = def;
    return add(std::move(v));
  }

  // Abstract state fingerprint for loop cutoff. Constants hash by payload so
  // counting loops unroll until the visit cap; symbolic values hash by shape.
  uint64_t fingerprint(const PathState& st) const {
    uint64_t h = 0x811c9dc5;
    h = mix(h, st.stack.size());
    for (Vid v : st.stack) {
      const Value& val = g.values[v];
      h = mix(h, static_cast<uint64_t>(val.kind));
      h = mix(h, val.opcode);
      if (val.kind == ValueKind::Const || val.kind == ValueKind::CallArg)
        h = mix(h, hash_u256(val.cst));
    }
    for (const auto& [off, v] : st.memory) {
      h = mix(h, hash_u256(off));
      const Value& val = g.values[v];
      h = mix(h, static_cast<uint64_t>(val.kind));
      if (val.kind == ValueKind::Const) h = mix(h, hash_u256(val.cst));
    }
    return h;
  }

  bool from_calldata(Vid v) const {
    std::vector<Vid> work{v};
    std::set<Vid> seen_v;
    while (!work.empty()) {
      Vid cur = work.back();
      work.pop_back();
      if (!seen_v.insert(cur).second) continue;
      const Value& val = g.values[cur];
      if (val.kind == ValueKind::CallArg || val.kind == ValueKind::CallDataRaw) return true;
      if (val.a != kNoVid) work.push_back(val.a);
      if (val.b != kNoVid) work.push_back(val.b);
      for (Vid o : val.ops) work.push_back(o);
    }
    return false;
  }

  void clobber_range(AbstractMemory& mem, const u256& off, const u256& len) {
    if (len == 0) return;
    u256 lo = off >= 31 ? off - 31 : u256(0);
    u256 hi = off + len;  // words starting in [lo, hi) may overlap the write
    for (auto it = mem.lower_bound(lo); it != mem.end() && it->first < hi;)
      it = mem.erase(it);
  }

  void add_cf(int32_t from, int32_t to) { g.cf_edges.emplace(from, to); }

  void note_uses(int32_t block, const std::vector<Vid>& uses) {
    for (Vid u : uses) {
      const DefSite& d = g.values[u].def;
      if (d.block >= 0 && d.block != block) g.dd_edges.emplace(d.block, block);
    }
  }

  // Resolves a constant jump target to a block id; -2 if invalid.
  int32_t resolve_target(const u256& target) {
    if (target > 0x7fffffff) return -2;
    int32_t off = static_cast<int32_t>(target);
    auto it = g.blocks.find(off);
    if (it == g.blocks.end()) return -2;
    const auto& ins = it->second.instructions;
    if (ins.empty() || ins.front().opcode != op::JUMPDEST) return -2;
    return off;
  }

  void enqueue(int32_t block, std::vector<Vid> stack, AbstractMemory memory) {
    PathState next;
    next.block = block;
    next.stack = std::move(stack);
    next.memory = std::move(memory);
    queue.push_back(std::move(next));
  }

  void run() {
    if (g.blocks.empty()) return;
    PathState entry;
    entry.block = g.blocks.begin()->first;
    queue.push_back(std::move(entry));
    while (!queue.empty()) {
      if (steps > opts.max_steps) {
        g.diag.step_budget_exhausted = true;
        break;
      }
      PathState st = std::move(queue.front());
      queue.pop_front();
      if (!g.has_block(st.block)) continue;
      auto& fps = seen[st.block];
      uint64_t fp = fingerprint(st);
      if (fps.count(fp)) continue;
      if (static_cast<int>(fps.size()) >= opts.max_block_visits) {
        g.diag.visit_cap_hits++;
        continue;
      }
      fps.insert(fp);
      bool canonical = visited.insert(st.block).second;
      exec_block(std::move(st), canonical);
    }
    g.diag.unresolved_jumps = static_cast<uint32_t>(unresolved_sites.size());
  }

  void exec_block(PathState st, bool canonical);
};

void Sim::exec_block(PathState st, bool canonical) {
  BasicBlock& bb = g.blocks[st.block];
  auto& stack = st.stack;

  for (uint32_t idx = 0; idx < bb.instructions.size(); ++idx) {
    const Instruction& ins = bb.instructions[idx];
    const OpInfo& info = opcode_info(ins.opcode);
    ++steps;
    if (steps > opts.max_steps) {
      g.diag.step_budget_exhausted = true;
      return;
    }

    if (stack.size() < info.pops) {
      if (canonical) {
        bb.malformed = true;
        bb.stmts.clear();
        g.diag.malformed_blocks++;
      }
      return;  // this path cannot execute the block; drop it
    }

    DefSite here{st.block, static_cast<int32_t>(bb.stmts.size())};
    std::vector<Vid> uses;
    Vid def = kNoVid;
    uint8_t opc = ins.opcode;

    auto pop = [&]() {
      Vid v = stack.back();
      stack.pop_back();
      return v;
    };
    auto record_stmt = [&]() {
      note_uses(st.block, uses);
      if (canonical) bb.stmts.push_back(Stmt{idx, uses, def});
    };
    int32_t stmt_index = canonical ? static_cast<int32_t>(bb.stmts.size()) : -1;

    if (is_push(opc) || opc == op::PUSH0) {
      def = make(ValueKind::Const, here, opc, kNoVid, kNoVid, ins.push_value());
      stack.push_back(def);
      record_stmt();
      continue;
    }
    if (is_dup(opc)) {
      unsigned n = opc - op::DUP1 + 1;
      stack.push_back(stack[stack.size() - n]);
      record_stmt();
      continue;
    }
    if (is_swap(opc)) {
      unsigned n = opc - op::SWAP1 + 1;
      std::swap(stack[stack.size() - 1], stack[stack.size() - 1 - n]);
      record_stmt();
      continue;
    }

    switch (opc) {
      case op::STOP:
        record_stmt();
        return;
      case op::JUMPDEST:
      case op::POP: {
        if (opc == op::POP) pop();
        record_stmt();
        continue;
      }
      case op::PC: {
        def = make(ValueKind::Const, here, opc, kNoVid, kNoVid, u256(ins.offset));
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::CALLER:
      case op::ORIGIN:
      case op::ADDRESS:
      case op::CALLVALUE:
      case op::CALLDATASIZE:
      case op::TIMESTAMP:
      case op::NUMBER: {
        ValueKind k = opc == op::CALLER         ? ValueKind::Caller
                      : opc == op::ORIGIN       ? ValueKind::Origin
                      : opc == op::ADDRESS      ? ValueKind::SelfAddress
                      : opc == op::CALLVALUE    ? ValueKind::CallValue
                      : opc == op::CALLDATASIZE ? ValueKind::CallDataSize
                      : opc == op::TIMESTAMP    ? ValueKind::Timestamp
                                                : ValueKind::BlockNumber;
        def = make(k, here, opc);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::CALLDATALOAD: {
        Vid off = pop();
        uses = {off};
        const Value& ov = g.values[off];
        if (ov.kind == ValueKind::Const)
          def = make(ValueKind::CallArg, here, opc, kNoVid, kNoVid, ov.cst);
        else
          def = make(ValueKind::CallDataRaw, here, opc, off);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::SHA3: {
        Vid off = pop();
        Vid len = pop();
        uses = {off, len};
        const Value& ov = g.values[off];
        const Value& lv = g.values[len];
        std::vector<Vid> words;
        bool resolved = false;
        if (ov.kind == ValueKind::Const && lv.kind == ValueKind::Const && lv.cst <= 1024) {
          resolved = true;
          for (u256 o = ov.cst; o < ov.cst + lv.cst; o += 32) {
            auto it = st.memory.find(o);
            if (it == st.memory.end()) {
              resolved = false;
              break;
            }
            words.push_back(it->second);
          }
        }
        if (!resolved) words.clear();
        def = make(ValueKind::Sha3, here, opc, kNoVid, kNoVid,
                   lv.kind == ValueKind::Const ? lv.cst : u256(0), std::move(words));
        for (Vid w : g.values[def].ops) uses.push_back(w);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::MLOAD: {
        Vid off = pop();
        uses = {off};
        const Value& ov = g.values[off];
        if (ov.kind == ValueKind::Const) {
          auto it = st.memory.find(ov.cst);
          if (it != st.memory.end()) {
            stack.push_back(it->second);
            uses.push_back(it->second);
            record_stmt();
            continue;
          }
        }
        def = make(ValueKind::MLoad, here, opc, off);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::MSTORE:
      case op::MSTORE8: {
        Vid off = pop();
        Vid val = pop();
        uses = {off, val};
        const Value& ov = g.values[off];
        if (ov.kind == ValueKind::Const) {
          clobber_range(st.memory, ov.cst, opc == op::MSTORE ? 32 : 1);
          if (opc == op::MSTORE) st.memory[ov.cst] = val;
        } else {
          st.memory.clear();
        }
        record_stmt();
        continue;
      }
      case op::SLOAD: {
        Vid slot = pop();
        uses = {slot};
        def = make(ValueKind::SLoad, here, opc, slot);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::SSTORE: {
        Vid slot = pop();
        Vid val = pop();
        uses = {slot, val};
        if (canonical) g.sstores.push_back(SStoreRec{st.block, stmt_index, slot, val});
        record_stmt();
        continue;
      }
      case op::JUMP: {
        Vid target = pop();
        uses = {target};
        record_stmt();
        // Internal-call idiom: a constant return address (a JUMPDEST right
        // after this JUMP) sits near the top of the remaining stack.
        uint32_t after = ins.offset + 1;
        for (size_t d = 0; d < stack.size() && d < 4; ++d) {
          const Value& v = g.values[stack[stack.size() - 1 - d]];
          if (v.kind == ValueKind::Const && v.cst == after && resolve_target(v.cst) >= 0) {
            bb.has_internal_call = true;
            break;
          }
        }
        const Value& tv = g.values[target];
        if (tv.kind == ValueKind::Const) {
          int32_t to = resolve_target(tv.cst);
          if (to >= 0) {
            add_cf(st.block, to);
            enqueue(to, stack, st.memory);
          } else {
            g.diag.invalid_jump_targets++;
          }
        } else {
          unresolved_sites.emplace(st.block, static_cast<int32_t>(idx));
          g.has_sink = true;
          add_cf(st.block, kSinkBlock);
        }
        return;
      }
      case op::JUMPI: {
        Vid target = pop();
        Vid cond = pop();
        uses = {target, cond};
        record_stmt();
        const Value& tv = g.values[target];
        int32_t to = -2;
        if (tv.kind == ValueKind::Const) {
          to = resolve_target(tv.cst);
          if (to < 0) g.diag.invalid_jump_targets++;
        } else {
          unresolved_sites.emplace(st.block, static_cast<int32_t>(idx));
          g.has_sink = true;
          add_cf(st.block, kSinkBlock);
        }
        int32_t fall = -2;
        if (idx + 1 < bb.instructions.size()) {
          fall = static_cast<int32_t>(bb.instructions[idx + 1].offset);
        } else {
          uint32_t next_off = ins.offset + 1;
          if (g.has_block(static_cast<int32_t>(next_off))) fall = static_cast<int32_t>(next_off);
        }
        if (canonical) g.jumpis.push_back(JumpiRec{st.block, stmt_index, cond, to, fall});

        // Dispatcher probe: EQ(const <= 4 bytes, calldata-derived) feeding a
        // resolved JUMPI marks a public-function entry.
        const Value& cv = g.values[cond];
        if (cv.kind == ValueKind::BinOp && cv.opcode == op::EQ && to >= 0) {
          const Value& lhs = g.values[cv.a];
          const Value& rhs = g.values[cv.b];
          const Value* cst = nullptr;
          Vid other = kNoVid;
          if (lhs.kind == ValueKind::Const && rhs.kind != ValueKind::Const) {
            cst = &lhs;
            other = cv.b;
          } else if (rhs.kind == ValueKind::Const && lhs.kind != ValueKind::Const) {
            cst = &rhs;
            other = cv.a;
          }
          if (cst && cst->cst <= 0xffffffffu && from_calldata(other)) {
            g.functions.emplace(static_cast<uint32_t>(cst->cst), to);
            if (fall >= 0) last_dispatch_fallthrough = fall;
          }
        }

        if (to >= 0) {
          add_cf(st.block, to);
          enqueue(to, stack, st.memory);
        }
        if (fall >= 0) {
          add_cf(st.block, fall);
          enqueue(fall, stack, st.memory);
        }
        return;
      }
      case op::RETURN:
      case op::REVERT: {
        Vid off = pop();
        Vid len = pop();
        uses = {off, len};
        record_stmt();
        return;
      }
      case op::SELFDESTRUCT: {
        uses = {pop()};
        record_stmt();
        return;
      }
      case op::CALL:
      case op::CALLCODE:
      case op::DELEGATECALL:
      case op::STATICCALL: {
        bool has_value = opc == op::CALL || opc == op::CALLCODE;
        std::vector<Vid> popped;
        for (unsigned i = 0; i < info.pops; ++i) popped.push_back(pop());
        uses = popped;
        Vid target = popped[1];
        Vid value = has_value ? popped[2] : kNoVid;
        if (canonical) g.calls.push_back(CallRec{st.block, stmt_index, opc, target, value});
        // Return data lands in memory; be conservative.
        Vid ret_off = popped[info.pops - 2];
        Vid ret_len = popped[info.pops - 1];
        const Value& ro = g.values[ret_off];
        const Value& rl = g.values[ret_len];
        if (ro.kind == ValueKind::Const && rl.kind == ValueKind::Const)
          clobber_range(st.memory, ro.cst, rl.cst);
        else
          st.memory.clear();
        def = make(ValueKind::CallResult, here, opc, target);
        stack.push_back(def);
        record_stmt();
        continue;
      }
      case op::CALLDATACOPY:
      case 0x39:    // CODECOPY
      case 0x3e: {  // RETURNDATACOPY
        Vid dst = pop();
        Vid src = pop();
        Vid len = pop();
        uses = {dst, src, len};
        const Value& dv = g.values[dst];
        const Value& lv = g.values[len];
        if (dv.kind == ValueKind::Const && lv.kind == ValueKind::Const)
          clobber_range(st.memory, dv.cst, lv.cst);
        else
          st.memory.clear();
        record_stmt();
        continue;
      }
      case 0x3c: {  // EXTCODECOPY
        Vid addr = pop();
        Vid dst = pop();
        Vid src = pop();
        Vid len = pop();
        uses = {addr, dst, src, len};
        st.memory.clear();
        record_stmt();
        continue;
      }
      default:
        break;
    }

    if (is_log(opc)) {
      unsigned n = opc - op::LOG0;
      Vid off = pop();
      Vid len = pop();
      uses = {off, len};
      std::vector<Vid> topics;
      for (unsigned i = 0; i < n; ++i) {
        Vid t = pop();
        topics.push_back(t);
        uses.push_back(t);
      }
      if (canonical)
        g.logs.push_back(LogRec{st.block, stmt_index, static_cast<uint8_t>(n), topics});
      record_stmt();
      continue;
    }

    if (!info.defined || opc == op::INVALID) {
      record_stmt();
      return;
    }

    // Generic path: fold constants for the common unsigned ops, otherwise
    // build a symbolic node of matching arity.
    std::vector<Vid> popped;
    for (unsigned i = 0; i < info.pops; ++i) popped.push_back(pop());
    uses = popped;

    auto all_const = [&]() {
      for (Vid v : popped)
        if (g.values[v].kind != ValueKind::Const) return false;
      return !popped.empty();
    };
    auto cval = [&](unsigned i) { return g.values[popped[i]].cst; };

    bool folded = false;
    u256 folded_val = 0;
    if (all_const()) {
      folded = true;
      switch (opc) {
        case op::ADD: folded_val = cval(0) + cval(1); break;
        case op::MUL: folded_val = cval(0) * cval(1); break;
        case op::SUB: folded_val = cval(0) - cval(1); break;
        case op::DIV: folded_val = cval(1) == 0 ? u256(0) : cval(0) / cval(1); break;
        case op::MOD: folded_val = cval(1) == 0 ? u256(0) : cval(0) % cval(1); break;
        case op::EXP: {
          u256 base = cval(0), e = cval(1), acc = 1;
          while (e != 0) {
            if ((e & 1) != 0) acc *= base;
            base *= base;
            e >>= 1;
          }
          folded_val = acc;
          break;
        }
        case op::LT: folded_val = cval(0) < cval(1) ? 1 : 0; break;
        case op::GT: folded_val = cval(0) > cval(1) ? 1 : 0; break;
        case op::EQ: folded_val = cval(0) == cval(1) ? 1 : 0; break;
        case op::ISZERO: folded_val = cval(0) == 0 ? 1 : 0; break;
        case op::AND: folded_val = cval(0) & cval(1); break;
        case op::OR: folded_val = cval(0) | cval(1); break;
        case op::XOR: folded_val = cval(0) ^ cval(1); break;
        case op::NOT: folded_val = ~cval(0); break;
        case op::SHL: folded_val = cval(0) >= 256 ? u256(0) : cval(1) << static_cast<unsigned>(cval(0)); break;
        case op::SHR: folded_val = cval(0) >= 256 ? u256(0) : cval(1) >> static_cast<unsigned>(cval(0)); break;
        default: folded = false; break;
      }
    }

    if (info.pushes > 0) {
      if (folded) {
        def = make(ValueKind::Const, here, opc, kNoVid, kNoVid, folded_val);
      } else if (popped.size() == 1) {
        def = make(ValueKind::UnOp, here, opc, popped[0]);
      } else if (popped.size() == 2) {
        def = make(ValueKind::BinOp, here, opc, popped[0], popped[1]);
      } else if (popped.empty()) {
        def = make(ValueKind::Env, here, opc);
      } else {
        def = make(ValueKind::Nary, here, opc, kNoVid, kNoVid, 0, popped);
      }
      stack.push_back(def);
    }
    record_stmt();
  }

  // Fell off the end of the block: fall through to the next leader if any.
  const Instruction& last = bb.instructions.back();
  uint32_t next_off = last.offset + 1 + static_cast<uint32_t>(last.immediate.size());
  if (g.has_block(static_cast<int32_t>(next_off))) {
    add_cf(st.block, static_cast<int32_t>(next_off));
    enqueue(static_cast<int32_t>(next_off), std::move(st.stack), std::move(st.memory));
  }
}

}  // namespace

CodeGraph lift(const Bytes& runtime_code, const LiftOptions& opts) {
  if (runtime_code.empty()) throw input_error("empty bytecode");
  DisasmResult dis = disassemble(runtime_code, opts.strip_metadata);
  if (dis.instructions.empty()) throw input_error("bytecode contains no instructions");

  CodeGraph g;
  g.diag.truncated_push = dis.truncated_push;
  g.diag.metadata_len = dis.metadata_len;

  // Block leaders: entry, JUMPDESTs, and fall-throughs of terminators/JUMPI.
  std::set<uint32_t> leaders;
  leaders.insert(dis.instructions.front().offset);
  for (size_t i = 0; i < dis.instructions.size(); ++i) {
    const Instruction& ins = dis.instructions[i];
    if (ins.opcode == op::JUMPDEST) leaders.insert(ins.offset);
    if ((is_terminator(ins.opcode) || ins.opcode == op::JUMPI) && i + 1 < dis.instructions.size())
      leaders.insert(dis.instructions[i + 1].offset);
  }

  BasicBlock* cur = nullptr;
  for (const Instruction& ins : dis.instructions) {
    if (leaders.count(ins.offset) || cur == nullptr) {
      int32_t id = static_cast<int32_t>(ins.offset);
      cur = &g.blocks[id];
      cur->id = id;
    }
    cur->instructions.push_back(ins);
    if (is_terminator(ins.opcode) || ins.opcode == op::JUMPI) cur = nullptr;
  }

  Sim sim(g, opts);
  sim.run();

  // Drop unreachable blocks. Anything the simulator never entered carries no
  // facts and only inflates the graph (padding, data sections).
  std::vector<int32_t> dead;
  for (const auto& [id, bb] : g.blocks)
    if (!sim.visited.count(id)) dead.push_back(id);
  for (int32_t id : dead) g.blocks.erase(id);
  g.diag.unreachable_blocks_dropped = static_cast<uint32_t>(dead.size());

  if (g.has_sink) {
    BasicBlock sink;
    sink.id = kSinkBlock;
    g.blocks.emplace(kSinkBlock, std::move(sink));
  }

  // Function membership: breadth-first from each selector entry, ascending;
  // shared blocks belong to the first function that reaches them.
  {
    std::map<int32_t, std::vector<int32_t>> adj;
    for (const auto& [a, b] : g.cf_edges) adj[a].push_back(b);
    for (const auto& [sel, entry] : g.functions) {
      if (!g.has_block(entry)) continue;
      std::deque<int32_t> bfs{entry};
      std::set<int32_t> seen_b{entry};
      while (!bfs.empty()) {
        int32_t b = bfs.front();
        bfs.pop_front();
        auto it = g.blocks.find(b);
        if (it == g.blocks.end()) continue;
        if (!it->second.function) it->second.function = sel;
        for (int32_t nxt : adj[b])
          if (nxt != kSinkBlock && seen_b.insert(nxt).second) bfs.push_back(nxt);
      }
    }
  }

  if (sim.last_dispatch_fallthrough >= 0 && g.has_block(sim.last_dispatch_fallthrough))
    g.fallback_block = sim.last_dispatch_fallthrough;

  return g;
}

bool derives_from(const CodeGraph& g, Vid v, const std::function<bool(const Value&)>& pred) {
  std::vector<Vid> work{v};
  std::set<Vid> seen;
  while (!work.empty()) {
    Vid cur = work.back();
    work.pop_back();
    if (cur == kNoVid || cur >= g.values.size()) continue;
    if (!seen.insert(cur).second) continue;
    const Value& val = g.values[cur];
    if (pred(val)) return true;
    if (val.a != kNoVid) work.push_back(val.a);
    if (val.b != kNoVid) work.push_back(val.b);
    for (Vid o : val.ops) work.push_back(o);
  }
  return false;
}

}  // namespace rugscan

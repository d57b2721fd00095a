#include "rugscan/facts.hpp"

#include <deque>

namespace rugscan {

const u256 kTransferTopic =
    u256("0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef");

StorageRef classify_slot(const CodeGraph& g, Vid slot) {
  StorageRef ref;
  if (slot == kNoVid || slot >= g.values.size()) return ref;
  const Value& v = g.val(slot);
  if (v.kind == ValueKind::Const) {
    ref.kind = StorageRef::Kind::Scalar;
    ref.base = v.cst;
    return ref;
  }
  if (v.kind == ValueKind::Sha3 && !v.ops.empty()) {
    // Solidity mapping layout: keccak(key . base); nested maps hash into the
    // inner hash, so the root base is found by following the last word down.
    Vid key = v.ops.front();
    Vid tail = v.ops.back();
    for (int depth = 0; depth < 16; ++depth) {
      const Value& t = g.val(tail);
      if (t.kind == ValueKind::Const) {
        ref.kind = StorageRef::Kind::Mapping;
        ref.base = t.cst;
        ref.key = key;
        return ref;
      }
      if (t.kind == ValueKind::Sha3 && !t.ops.empty()) {
        tail = t.ops.back();
        continue;
      }
      break;
    }
  }
  return ref;
}

bool derives_from_set(const CodeGraph& g, Vid v, const std::set<Vid>& set) {
  if (set.empty()) return false;
  return derives_from(g, v, [&](const Value& val) {
    // Walk by identity: the value table owns its entries, so pointer
    // arithmetic gives the vid back without storing it in Value.
    Vid vid = static_cast<Vid>(&val - g.values.data());
    return set.count(vid) != 0;
  });
}

namespace {

bool derives_from_kind(const CodeGraph& g, Vid v, ValueKind kind) {
  return derives_from(g, v, [&](const Value& val) { return val.kind == kind; });
}

// Owner-guard patterns on a branch condition:
//  A) CALLER compared (EQ) against a scalar storage load, either order,
//     possibly wrapped in ISZERO chains or address masking.
//  B) nonzero test of a role-mapping load keyed by CALLER.
bool is_owner_guard_cond(const CodeGraph& g, Vid cond) {
  bool found = false;
  derives_from(g, cond, [&](const Value& val) {
    if (found) return true;
    if (val.kind == ValueKind::BinOp && val.opcode == op::EQ) {
      Vid sides[2] = {val.a, val.b};
      for (int i = 0; i < 2; ++i) {
        Vid x = sides[i], y = sides[1 - i];
        bool x_caller = derives_from_kind(g, x, ValueKind::Caller) &&
                        !derives_from_kind(g, x, ValueKind::SLoad);
        if (!x_caller) continue;
        bool y_load = derives_from(g, y, [&](const Value& w) {
          if (w.kind != ValueKind::SLoad) return false;
          return classify_slot(g, w.a).kind == StorageRef::Kind::Scalar;
        });
        if (y_load && !derives_from_kind(g, y, ValueKind::Caller)) {
          found = true;
          return true;
        }
      }
    }
    if (val.kind == ValueKind::SLoad) {
      StorageRef ref = classify_slot(g, val.a);
      if (ref.kind == StorageRef::Kind::Mapping && ref.key != kNoVid &&
          derives_from_kind(g, ref.key, ValueKind::Caller)) {
        found = true;
        return true;
      }
    }
    return false;
  });
  return found;
}

std::set<int32_t> reachable_within(const std::set<int32_t>& allowed,
                                   const std::set<std::pair<int32_t, int32_t>>& edges,
                                   int32_t start) {
  std::set<int32_t> out;
  if (!allowed.count(start)) return out;
  std::deque<int32_t> q{start};
  out.insert(start);
  std::map<int32_t, std::vector<int32_t>> adj;
  for (const auto& [a, b] : edges)
    if (allowed.count(a) && allowed.count(b)) adj[a].push_back(b);
  while (!q.empty()) {
    int32_t b = q.front();
    q.pop_front();
    for (int32_t n : adj[b])
      if (out.insert(n).second) q.push_back(n);
  }
  return out;
}

}  // namespace

Facts derive_base_facts(const CodeGraph& g) {
  Facts f;
  f.tainted.assign(g.values.size(), 0);

  // Per-function reachable block sets. Shared helper blocks may appear in
  // several functions; rule scoping wants "executes within f", not ownership.
  std::map<int32_t, std::vector<int32_t>> adj;
  for (const auto& [a, b] : g.cf_edges)
    if (b != kSinkBlock) adj[a].push_back(b);
  for (const auto& [sel, entry] : g.functions) {
    FunctionFacts ff;
    ff.selector = sel;
    ff.entry = entry;
    std::deque<int32_t> q{entry};
    ff.blocks.insert(entry);
    while (!q.empty()) {
      int32_t b = q.front();
      q.pop_front();
      for (int32_t n : adj[b])
        if (ff.blocks.insert(n).second) q.push_back(n);
    }
    f.fns.emplace(sel, std::move(ff));
  }

  // Calldata arguments per function (selector word at offset 0 excluded).
  for (Vid v = 0; v < g.values.size(); ++v) {
    const Value& val = g.values[v];
    if (val.kind != ValueKind::CallArg || val.cst < 4) continue;
    for (auto& [sel, ff] : f.fns)
      if (ff.blocks.count(val.def.block)) ff.args.push_back(v);
  }

  // Storage access classification.
  struct WriteInfo {
    const SStoreRec* rec;
    StorageRef ref;
  };
  std::vector<WriteInfo> writes;
  for (const SStoreRec& s : g.sstores) writes.push_back({&s, classify_slot(g, s.slot)});

  struct ReadInfo {
    Vid load;
    StorageRef ref;
    int32_t block;
  };
  std::vector<ReadInfo> reads;
  for (Vid v = 0; v < g.values.size(); ++v) {
    const Value& val = g.values[v];
    if (val.kind == ValueKind::SLoad)
      reads.push_back({v, classify_slot(g, val.a), val.def.block});
  }

  // Guard blocks and privileged flags.
  for (auto& [sel, ff] : f.fns) {
    for (const JumpiRec& j : g.jumpis) {
      if (!ff.blocks.count(j.block)) continue;
      if (is_owner_guard_cond(g, j.cond)) ff.guard_blocks.insert(j.block);
    }
    std::set<int32_t> unguarded = ff.blocks;
    for (int32_t gb : ff.guard_blocks) unguarded.erase(gb);
    std::set<int32_t> reach = reachable_within(unguarded, g.cf_edges, ff.entry);
    bool all_guarded = true;
    for (const WriteInfo& w : writes) {
      if (!ff.blocks.count(w.rec->block)) continue;
      ff.has_sstore = true;
      if (!ff.guard_blocks.count(w.rec->block) && reach.count(w.rec->block)) all_guarded = false;
    }
    ff.privileged = ff.has_sstore && !ff.guard_blocks.empty() && all_guarded;
  }

  // Transfer-like functions and balance maps. A map is "balance-like" when a
  // function both reads and writes it with an address-ish key (caller or an
  // address argument).
  for (auto& [sel, ff] : f.fns) {
    if (sel == kSelTransfer || sel == kSelTransferFrom) ff.transfer_like = true;
    std::set<Vid> arg_set(ff.args.begin(), ff.args.end());
    std::set<u256> rmw_bases;
    for (const WriteInfo& w : writes) {
      if (!ff.blocks.count(w.rec->block)) continue;
      if (w.ref.kind != StorageRef::Kind::Mapping || w.ref.key == kNoVid) continue;
      bool addr_key = derives_from_kind(g, w.ref.key, ValueKind::Caller) ||
                      derives_from_set(g, w.ref.key, arg_set);
      if (!addr_key) continue;
      for (const ReadInfo& r : reads) {
        if (r.ref.kind == StorageRef::Kind::Mapping && r.ref.base == w.ref.base &&
            ff.blocks.count(r.block)) {
          rmw_bases.insert(w.ref.base);
          break;
        }
      }
    }
    if (!rmw_bases.empty()) ff.transfer_like = true;
    if (ff.transfer_like)
      for (const u256& b : rmw_bases) f.balance_maps.insert(b);
  }

  // Privileged-update slots: written at least once, and every write site sits
  // only inside privileged functions.
  {
    std::map<u256, bool> scalar_ok, map_ok;  // base -> all writes privileged
    auto account = [&](std::map<u256, bool>& m, const u256& base, int32_t block) {
      bool priv = false;
      bool in_any = false;
      for (const auto& [sel, ff] : f.fns) {
        if (!ff.blocks.count(block)) continue;
        in_any = true;
        if (!ff.privileged) {
          priv = false;
          goto done;
        }
        priv = true;
      }
    done:
      bool ok = in_any && priv;
      auto it = m.find(base);
      if (it == m.end())
        m[base] = ok;
      else
        it->second = it->second && ok;
    };
    for (const WriteInfo& w : writes) {
      if (w.ref.kind == StorageRef::Kind::Scalar)
        account(scalar_ok, w.ref.base, w.rec->block);
      else if (w.ref.kind == StorageRef::Kind::Mapping)
        account(map_ok, w.ref.base, w.rec->block);
    }
    for (const auto& [base, ok] : scalar_ok)
      if (ok) f.pumv.insert(base);
    for (const auto& [base, ok] : map_ok)
      if (ok) f.pumd.insert(base);
  }

  // Total-supply slots: what totalSupply() reads; else scalar slots written
  // by privileged functions that also touch a balance map (mint shape).
  {
    auto it = f.fns.find(kSelTotalSupply);
    if (it != f.fns.end()) {
      for (const ReadInfo& r : reads)
        if (r.ref.kind == StorageRef::Kind::Scalar && it->second.blocks.count(r.block))
          f.supply_slots.insert(r.ref.base);
    }
    if (f.supply_slots.empty()) {
      for (const auto& [sel, ff] : f.fns) {
        if (!ff.privileged) continue;
        bool touches_balance = false;
        for (const WriteInfo& w : writes)
          if (ff.blocks.count(w.rec->block) && w.ref.kind == StorageRef::Kind::Mapping &&
              f.balance_maps.count(w.ref.base))
            touches_balance = true;
        if (!touches_balance) continue;
        for (const WriteInfo& w : writes)
          if (ff.blocks.count(w.rec->block) && w.ref.kind == StorageRef::Kind::Scalar)
            f.supply_slots.insert(w.ref.base);
      }
    }
  }

  // Taint seeds: privileged scalars, plus privileged maps that are not plain
  // balance bookkeeping (a mint-only balances map would otherwise taint every
  // require(balance >= amount) in transfer).
  f.seed_scalars = f.pumv;
  for (const u256& m : f.pumd)
    if (!f.balance_maps.count(m)) f.seed_maps.insert(m);

  // Forward closure over the value DAG. Operand vids always precede the
  // defined vid, so one ascending pass settles the fixpoint.
  for (Vid v = 0; v < g.values.size(); ++v) {
    const Value& val = g.values[v];
    bool t = false;
    if (val.kind == ValueKind::SLoad) {
      StorageRef ref = classify_slot(g, val.a);
      if (ref.kind == StorageRef::Kind::Scalar && f.seed_scalars.count(ref.base)) t = true;
      if (ref.kind == StorageRef::Kind::Mapping && f.seed_maps.count(ref.base)) t = true;
    }
    if (!t) {
      if (val.a != kNoVid && f.tainted[val.a]) t = true;
      if (!t && val.b != kNoVid && f.tainted[val.b]) t = true;
      if (!t)
        for (Vid o : val.ops)
          if (f.tainted[o]) {
            t = true;
            break;
          }
    }
    f.tainted[v] = t ? 1 : 0;
  }

  // Amount/address argument roles.
  for (auto& [sel, ff] : f.fns) {
    std::set<u256> amount_offsets, address_offsets;
    if (sel == kSelTransfer) {
      address_offsets.insert(4);
      amount_offsets.insert(0x24);
    } else if (sel == kSelTransferFrom) {
      address_offsets.insert(4);
      address_offsets.insert(0x24);
      amount_offsets.insert(0x44);
    }
    std::set<Vid> arg_set(ff.args.begin(), ff.args.end());
    for (Vid a : ff.args) {
      const Value& av = g.values[a];
      bool is_amount = amount_offsets.count(av.cst) != 0;
      bool is_address = address_offsets.count(av.cst) != 0;
      if (!is_amount && ff.transfer_like) {
        // Generic shape: the argument feeds the value stored into a balance
        // slot inside this function.
        for (const WriteInfo& w : writes) {
          if (!ff.blocks.count(w.rec->block)) continue;
          if (w.ref.kind != StorageRef::Kind::Mapping || !f.balance_maps.count(w.ref.base))
            continue;
          if (derives_from_set(g, w.rec->value, {a})) {
            is_amount = true;
            break;
          }
        }
      }
      if (!is_address) {
        // Generic shape: the argument keys a mapping access in this function.
        for (const ReadInfo& r : reads) {
          if (r.ref.kind != StorageRef::Kind::Mapping || r.ref.key == kNoVid) continue;
          if (!ff.blocks.count(r.block)) continue;
          if (derives_from_set(g, r.ref.key, {a})) {
            is_address = true;
            break;
          }
        }
        if (!is_address)
          for (const WriteInfo& w : writes) {
            if (w.ref.kind != StorageRef::Kind::Mapping || w.ref.key == kNoVid) continue;
            if (!ff.blocks.count(w.rec->block)) continue;
            if (derives_from_set(g, w.ref.key, {a})) {
              is_address = true;
              break;
            }
          }
      }
      if (is_amount) ff.amount_args.push_back(a);
      if (is_address) ff.address_args.push_back(a);
    }
  }

  return f;
}

}  // namespace rugscan

#include "rugscan/rules.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace rugscan {

const char* risk_name(Risk r) {
  switch (r) {
    case Risk::AR: return "AR";
    case Risk::TR: return "TR";
    case Risk::ADDR: return "ADDR";
    case Risk::MTR: return "MTR";
    case Risk::MTA: return "MTA";
    case Risk::MEC: return "MEC";
    case Risk::HM: return "HM";
    case Risk::HBM: return "HBM";
  }
  return "?";
}

const char* category_name(RiskCategory c) {
  switch (c) {
    case RiskCategory::SaleRestrict: return "SaleRestrict";
    case RiskCategory::VariableManipulation: return "VariableManipulation";
    case RiskCategory::BalanceTamper: return "BalanceTamper";
  }
  return "?";
}

RiskCategory category_of(Risk r) {
  switch (r) {
    case Risk::AR:
    case Risk::TR:
    case Risk::ADDR:
      return RiskCategory::SaleRestrict;
    case Risk::MTR:
    case Risk::MTA:
    case Risk::MEC:
      return RiskCategory::VariableManipulation;
    case Risk::HM:
    case Risk::HBM:
      return RiskCategory::BalanceTamper;
  }
  return RiskCategory::SaleRestrict;
}

bool risk_from_name(const std::string& name, Risk& out) {
  for (int i = 0; i <= static_cast<int>(Risk::HBM); ++i) {
    Risk r = static_cast<Risk>(i);
    if (name == risk_name(r)) {
      out = r;
      return true;
    }
  }
  return false;
}

namespace {

struct Match {
  int32_t source;
  int32_t sink;
  std::string note;
};

class Matcher {
 public:
  Matcher(const Facts& facts, const CodeGraph& g) : f_(facts), g_(g) {
    for (const auto& [a, b] : g_.cf_edges) adj_[a].push_back(b);
    for (const auto& [a, b] : g_.dd_edges) adj_[a].push_back(b);
    for (auto& [n, v] : adj_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::vector<RiskFinding> run() {
    match_ar();
    match_tr();
    match_addr();
    match_mtr();
    match_mta();
    match_mec();
    match_hm();
    match_hbm();

    std::vector<RiskFinding> out;
    for (auto& [risk, matches] : found_) {
      RiskFinding fd;
      fd.risk = risk;
      fd.category = category_of(risk);
      std::ostringstream w;
      size_t shown = 0;
      for (const Match& m : matches) {
        fd.cb.insert(m.source);
        fd.cb.insert(m.sink);
        add_path(fd.cf, m.source, m.sink);
        if (shown < 4) {
          if (shown) w << "; ";
          w << m.note;
          ++shown;
        }
      }
      if (matches.size() > shown) w << "; +" << (matches.size() - shown) << " more";
      fd.witness = w.str();
      out.push_back(std::move(fd));
    }
    return out;  // map keyed by Risk is already in enum order
  }

 private:
  const Facts& f_;
  const CodeGraph& g_;
  std::map<int32_t, std::vector<int32_t>> adj_;
  std::map<Risk, std::vector<Match>> found_;

  void add(Risk r, int32_t source, int32_t sink, std::string note) {
    found_[r].push_back(Match{source, sink, std::move(note)});
  }

  // Shortest source->sink path over control and data edges, ties broken by
  // exploring smaller block ids first (BFS discovery order is lexicographic
  // among equal-length paths). Pairs along the path land in `cf`.
  void add_path(std::set<std::pair<int32_t, int32_t>>& cf, int32_t src, int32_t dst) {
    if (src == dst) return;
    std::map<int32_t, int32_t> parent;
    std::deque<int32_t> q{src};
    parent[src] = src;
    while (!q.empty() && !parent.count(dst)) {
      int32_t b = q.front();
      q.pop_front();
      auto it = adj_.find(b);
      if (it == adj_.end()) continue;
      for (int32_t n : it->second)
        if (!parent.count(n)) {
          parent[n] = b;
          q.push_back(n);
        }
    }
    if (!parent.count(dst)) return;  // no witnessing path; blocks alone stand
    for (int32_t b = dst; b != src; b = parent[b]) cf.emplace(parent[b], b);
  }

  bool tainted(Vid v) const { return f_.is_tainted(v); }

  // First (lowest-vid) tainted storage load in v's DAG; kNoVid if none.
  // Used to point witnesses at the load of the manipulated variable.
  Vid seed_load(Vid v, bool scalar_only = false) const {
    std::vector<Vid> stack{v};
    std::set<Vid> seen;
    Vid best = kNoVid;
    while (!stack.empty()) {
      Vid cur = stack.back();
      stack.pop_back();
      if (cur == kNoVid || !seen.insert(cur).second) continue;
      const Value& val = g_.val(cur);
      if (val.kind == ValueKind::SLoad) {
        StorageRef ref = classify_slot(g_, val.a);
        bool hit = (ref.kind == StorageRef::Kind::Scalar && f_.seed_scalars.count(ref.base)) ||
                   (!scalar_only && ref.kind == StorageRef::Kind::Mapping &&
                    f_.seed_maps.count(ref.base));
        if (hit && (best == kNoVid || cur < best)) best = cur;
      }
      if (val.a != kNoVid) stack.push_back(val.a);
      if (val.b != kNoVid) stack.push_back(val.b);
      for (Vid o : val.ops) stack.push_back(o);
    }
    return best;
  }

  bool block_reverts(int32_t id) const {
    auto it = g_.blocks.find(id);
    if (it == g_.blocks.end() || it->second.instructions.empty()) return false;
    uint8_t last = it->second.instructions.back().opcode;
    return last == op::REVERT || last == op::INVALID || !opcode_info(last).defined;
  }

  static bool is_magnitude_cmp(uint8_t opc) {
    return opc == op::LT || opc == op::GT || opc == op::SLT || opc == op::SGT;
  }

  std::string slot_note(Vid load) const {
    StorageRef ref = classify_slot(g_, g_.val(load).a);
    std::ostringstream s;
    s << (ref.kind == StorageRef::Kind::Mapping ? "map " : "slot ") << u256_hex(ref.base);
    return s.str();
  }

  // C1-P1: amount argument of a transfer function compared (magnitude) against
  // privileged-controlled data.
  void match_ar() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like || fn.amount_args.empty()) continue;
      std::set<Vid> amounts(fn.amount_args.begin(), fn.amount_args.end());
      for (Vid v = 0; v < g_.values.size(); ++v) {
        const Value& val = g_.values[v];
        if (val.kind != ValueKind::BinOp || !is_magnitude_cmp(val.opcode)) continue;
        if (!fn.blocks.count(val.def.block)) continue;
        Vid sides[2] = {val.a, val.b};
        for (int i = 0; i < 2; ++i) {
          Vid amt = sides[i], other = sides[1 - i];
          if (!tainted(other) || tainted(amt)) continue;
          if (!derives_from_set(g_, amt, amounts)) continue;
          Vid load = seed_load(other);
          if (load == kNoVid) continue;
          std::ostringstream note;
          note << "AR: amount arg compared against " << slot_note(load) << " in fn 0x"
               << std::hex << sel;
          add(Risk::AR, g_.val(load).def.block, val.def.block, note.str());
          break;
        }
      }
    }
  }

  // C1-P2: TIMESTAMP-derived value compared against privileged-controlled data
  // inside a transfer function.
  void match_tr() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like) continue;
      for (Vid v = 0; v < g_.values.size(); ++v) {
        const Value& val = g_.values[v];
        if (val.kind != ValueKind::BinOp || !is_magnitude_cmp(val.opcode)) continue;
        if (!fn.blocks.count(val.def.block)) continue;
        Vid sides[2] = {val.a, val.b};
        for (int i = 0; i < 2; ++i) {
          Vid ts = sides[i], other = sides[1 - i];
          if (tainted(ts) || !tainted(other)) continue;
          if (!derives_from(g_, ts, [](const Value& w) { return w.kind == ValueKind::Timestamp; }))
            continue;
          Vid load = seed_load(other);
          if (load == kNoVid) continue;
          std::ostringstream note;
          note << "TR: TIMESTAMP compared against " << slot_note(load) << " in fn 0x" << std::hex
               << sel;
          add(Risk::TR, g_.val(load).def.block, val.def.block, note.str());
          break;
        }
      }
    }
  }

  // C1-P3: address argument keys into a privileged-controlled mapping; the
  // loaded value is zero-tested on a branch with a reverting side.
  void match_addr() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like) continue;
      std::set<Vid> addr_args(fn.address_args.begin(), fn.address_args.end());
      if (addr_args.empty()) continue;
      for (const JumpiRec& j : g_.jumpis) {
        if (!fn.blocks.count(j.block)) continue;
        bool reverting_side = (j.target >= 0 && block_reverts(j.target)) ||
                              (j.fallthrough >= 0 && block_reverts(j.fallthrough));
        if (!reverting_side) continue;
        // Find a zero-test over a tainted-map load keyed by an address arg
        // inside the branch condition.
        Vid hit_load = kNoVid;
        derives_from(g_, j.cond, [&](const Value& w) {
          bool is_iszero = w.kind == ValueKind::UnOp && w.opcode == op::ISZERO;
          bool is_eq_zero = false;
          if (w.kind == ValueKind::BinOp && w.opcode == op::EQ) {
            const Value& a = g_.val(w.a);
            const Value& b = g_.val(w.b);
            is_eq_zero = (a.kind == ValueKind::Const && a.cst == 0) ||
                         (b.kind == ValueKind::Const && b.cst == 0);
          }
          if (!is_iszero && !is_eq_zero) return false;
          Vid inner = w.kind == ValueKind::UnOp ? w.a : (g_.val(w.a).kind == ValueKind::Const ? w.b : w.a);
          derives_from(g_, inner, [&](const Value& l) {
            if (l.kind != ValueKind::SLoad) return false;
            StorageRef ref = classify_slot(g_, l.a);
            if (ref.kind != StorageRef::Kind::Mapping || !f_.seed_maps.count(ref.base))
              return false;
            if (ref.key == kNoVid || !derives_from_set(g_, ref.key, addr_args)) return false;
            hit_load = static_cast<Vid>(&l - g_.values.data());
            return true;
          });
          return hit_load != kNoVid;
        });
        if (hit_load == kNoVid) continue;
        // Source: the address argument load feeding the key.
        int32_t src = g_.val(hit_load).def.block;
        StorageRef ref = classify_slot(g_, g_.val(hit_load).a);
        for (Vid a : fn.address_args)
          if (derives_from_set(g_, ref.key, {a})) {
            src = g_.val(a).def.block;
            break;
          }
        std::ostringstream note;
        note << "ADDR: address arg keyed into " << slot_note(hit_load)
             << ", zero-test guards revert in fn 0x" << std::hex << sel;
        add(Risk::ADDR, src, j.block, note.str());
      }
    }
  }

  // C2-P1: privileged scalar reaches a MUL inside a transfer function.
  void match_mtr() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like) continue;
      for (Vid v = 0; v < g_.values.size(); ++v) {
        const Value& val = g_.values[v];
        if (val.kind != ValueKind::BinOp || val.opcode != op::MUL) continue;
        if (!fn.blocks.count(val.def.block)) continue;
        Vid load = kNoVid;
        if (tainted(val.a)) load = seed_load(val.a, /*scalar_only=*/true);
        if (load == kNoVid && tainted(val.b)) load = seed_load(val.b, /*scalar_only=*/true);
        if (load == kNoVid) continue;
        std::ostringstream note;
        note << "MTR: MUL over " << slot_note(load) << " in fn 0x" << std::hex << sel;
        add(Risk::MTR, g_.val(load).def.block, val.def.block, note.str());
      }
    }
  }

  // C2-P2: privileged scalar routes value: it keys a balance write, or is the
  // recipient of a value-bearing CALL, inside a transfer function.
  void match_mta() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like) continue;
      for (const SStoreRec& s : g_.sstores) {
        if (!fn.blocks.count(s.block)) continue;
        StorageRef ref = classify_slot(g_, s.slot);
        if (ref.kind != StorageRef::Kind::Mapping || !f_.balance_maps.count(ref.base)) continue;
        if (ref.key == kNoVid || !tainted(ref.key)) continue;
        Vid load = seed_load(ref.key, /*scalar_only=*/true);
        if (load == kNoVid) continue;
        std::ostringstream note;
        note << "MTA: balance write keyed by " << slot_note(load) << " in fn 0x" << std::hex
             << sel;
        add(Risk::MTA, g_.val(load).def.block, s.block, note.str());
      }
      for (const CallRec& c : g_.calls) {
        if (c.opcode != op::CALL || !fn.blocks.count(c.block)) continue;
        if (c.value != kNoVid) {
          const Value& vv = g_.val(c.value);
          if (vv.kind == ValueKind::Const && vv.cst == 0) continue;  // no value moved
        }
        if (!tainted(c.target)) continue;
        Vid load = seed_load(c.target, /*scalar_only=*/true);
        if (load == kNoVid) continue;
        std::ostringstream note;
        note << "MTA: CALL value recipient from " << slot_note(load) << " in fn 0x" << std::hex
             << sel;
        add(Risk::MTA, g_.val(load).def.block, c.block, note.str());
      }
    }
  }

  // C2-P3: privileged scalar controls the target of a pure control-transfer
  // call (DELEGATECALL/CALLCODE, or CALL with provably zero value) reachable
  // from a transfer function.
  void match_mec() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.transfer_like) continue;
      for (const CallRec& c : g_.calls) {
        if (!fn.blocks.count(c.block)) continue;
        bool delegate = c.opcode == op::DELEGATECALL || c.opcode == op::CALLCODE;
        bool zero_value_call = false;
        if (c.opcode == op::CALL && c.value != kNoVid) {
          const Value& vv = g_.val(c.value);
          zero_value_call = vv.kind == ValueKind::Const && vv.cst == 0;
        }
        if (!delegate && !zero_value_call) continue;
        if (!tainted(c.target)) continue;
        Vid load = seed_load(c.target, /*scalar_only=*/true);
        if (load == kNoVid) continue;
        std::ostringstream note;
        note << "MEC: " << opcode_info(c.opcode).name << " target from " << slot_note(load)
             << " in fn 0x" << std::hex << sel;
        add(Risk::MEC, g_.val(load).def.block, c.block, note.str());
      }
    }
  }

  // C3-P1: a privileged function grows total supply on a path that emits no
  // Transfer event before exiting.
  void match_hm() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.privileged) continue;
      std::set<int32_t> log_blocks;
      for (const LogRec& l : g_.logs) {
        if (!fn.blocks.count(l.block) || l.topics < 3 || l.topic_vids.empty()) continue;
        const Value& t0 = g_.val(l.topic_vids[0]);
        if (t0.kind == ValueKind::Const && t0.cst == kTransferTopic) log_blocks.insert(l.block);
      }
      std::set<int32_t> pruned = fn.blocks;
      for (int32_t b : log_blocks) pruned.erase(b);

      std::map<int32_t, std::vector<int32_t>> sub;
      for (const auto& [a, b] : g_.cf_edges)
        if (pruned.count(a) && pruned.count(b)) sub[a].push_back(b);
      auto reach_from = [&](int32_t start) {
        std::set<int32_t> out;
        if (!pruned.count(start)) return out;
        std::deque<int32_t> q{start};
        out.insert(start);
        while (!q.empty()) {
          int32_t b = q.front();
          q.pop_front();
          for (int32_t n : sub[b])
            if (out.insert(n).second) q.push_back(n);
        }
        return out;
      };
      auto halts_cleanly = [&](int32_t id) {
        auto it = g_.blocks.find(id);
        if (it == g_.blocks.end() || it->second.instructions.empty()) return false;
        uint8_t last = it->second.instructions.back().opcode;
        return last == op::STOP || last == op::RETURN || last == op::SELFDESTRUCT;
      };

      std::set<int32_t> from_entry = reach_from(fn.entry);
      for (const SStoreRec& s : g_.sstores) {
        if (!fn.blocks.count(s.block)) continue;
        StorageRef ref = classify_slot(g_, s.slot);
        if (ref.kind != StorageRef::Kind::Scalar || !f_.supply_slots.count(ref.base)) continue;
        if (!from_entry.count(s.block)) continue;  // event precedes the write
        std::set<int32_t> onward = reach_from(s.block);
        bool silent_exit = false;
        for (int32_t b : onward)
          if (halts_cleanly(b)) silent_exit = true;
        if (!silent_exit) continue;
        // Pair the supply write with a balance write in the same function
        // when one exists; that is the minted-balance side of the pattern.
        int32_t src = s.block;
        for (const SStoreRec& bw : g_.sstores) {
          if (!fn.blocks.count(bw.block)) continue;
          StorageRef bref = classify_slot(g_, bw.slot);
          if (bref.kind == StorageRef::Kind::Mapping && f_.balance_maps.count(bref.base)) {
            src = bw.block;
            break;
          }
        }
        std::ostringstream note;
        note << "HM: supply write " << slot_note_scalar(ref.base) << " with no Transfer event in fn 0x"
             << std::hex << sel;
        add(Risk::HM, src, s.block, note.str());
      }
    }
  }

  std::string slot_note_scalar(const u256& base) const { return "slot " + u256_hex(base); }

  // C3-P2: a privileged non-transfer function overwrites a balance slot keyed
  // by an address argument without reading it first.
  void match_hbm() {
    for (const auto& [sel, fn] : f_.fns) {
      if (!fn.privileged || fn.transfer_like) continue;
      std::set<Vid> arg_set(fn.args.begin(), fn.args.end());
      for (const SStoreRec& s : g_.sstores) {
        if (!fn.blocks.count(s.block)) continue;
        StorageRef ref = classify_slot(g_, s.slot);
        if (ref.kind != StorageRef::Kind::Mapping || !f_.balance_maps.count(ref.base)) continue;
        if (ref.key == kNoVid || !derives_from_set(g_, ref.key, arg_set)) continue;
        // Read-modify-write is bookkeeping, not tampering.
        bool rmw = derives_from(g_, s.value, [&](const Value& w) {
          if (w.kind != ValueKind::SLoad) return false;
          StorageRef r2 = classify_slot(g_, w.a);
          return r2.kind == StorageRef::Kind::Mapping && r2.base == ref.base;
        });
        if (rmw) continue;
        int32_t src = s.block;
        for (Vid a : fn.args)
          if (derives_from_set(g_, ref.key, {a})) {
            src = g_.values[a].def.block;
            break;
          }
        std::ostringstream note;
        note << "HBM: direct balance overwrite keyed by arg in fn 0x" << std::hex << sel;
        add(Risk::HBM, src, s.block, note.str());
      }
    }
  }
};

}  // namespace

std::vector<RiskFinding> match_rules(const Facts& facts, const CodeGraph& g) {
  std::vector<RiskFinding> out = Matcher(facts, g).run();
  for (const RiskFinding& fd : out) {
    for (int32_t b : fd.cb)
      if (!g.has_block(b))
        throw internal_error(std::string("finding ") + risk_name(fd.risk) +
                             " references unknown block " + std::to_string(b));
    for (const auto& [a, b] : fd.cf)
      if (!g.has_block(a) || !g.has_block(b))
        throw internal_error(std::string("finding ") + risk_name(fd.risk) +
                             " references unknown edge endpoint");
  }
  return out;
}

std::vector<RiskFinding> scan_code_risks(const Bytes& runtime_code) {
  CodeGraph g = lift(runtime_code);
  Facts f = derive_base_facts(g);
  return match_rules(f, g);
}

}  // namespace rugscan

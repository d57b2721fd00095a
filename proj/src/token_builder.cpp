#include "rugscan/token_builder.hpp"

#include <algorithm>
#include <random>

#include "rugscan/common.hpp"
#include "rugscan/facts.hpp"

namespace rugscan {

namespace {

struct Layout {
  u256 owner_slot = 0;
  u256 supply_slot = 1;
  u256 extra_slot = 2;   // the privileged knob (maxTx/launch/tax/wallet/impl)
  u256 unused_slot = 5;  // read-but-never-written slot for defused MEC
  u256 bal_map = 3;
  u256 bl_map = 4;     // blacklist (ADDR)
  u256 allow_map = 6;  // allowance
  uint32_t setter_sel = 0x7a812f33;
  uint32_t knob_sel = 0x5b1e3c44;  // secondary setter when extras need the knob
  int junk_fns = 0;
  std::vector<uint32_t> junk_sels;
  std::vector<int> order;  // dispatch permutation over function indices
};

bool is_standard_sel(uint32_t sel) {
  return sel == kSelTransfer || sel == kSelTransferFrom || sel == kSelApprove ||
         sel == kSelBalanceOf || sel == kSelTotalSupply || sel == kSelAllowance;
}

Layout make_layout(uint64_t seed, size_t fn_count) {
  Layout lay;
  lay.order.resize(fn_count);
  for (size_t i = 0; i < fn_count; ++i) lay.order[i] = static_cast<int>(i);
  if (seed == 0) return lay;

  std::mt19937_64 rng(seed);
  std::vector<int> scalars{0, 1, 2, 5, 7};
  std::shuffle(scalars.begin(), scalars.end(), rng);
  lay.owner_slot = scalars[0];
  lay.supply_slot = scalars[1];
  lay.extra_slot = scalars[2];
  lay.unused_slot = scalars[3];
  std::vector<int> maps{8, 9, 10, 11};
  std::shuffle(maps.begin(), maps.end(), rng);
  lay.bal_map = maps[0];
  lay.bl_map = maps[1];
  lay.allow_map = maps[2];
  // Random setter selectors away from the standard six and from each other.
  do {
    lay.setter_sel = static_cast<uint32_t>(rng());
  } while (is_standard_sel(lay.setter_sel));
  do {
    lay.knob_sel = static_cast<uint32_t>(rng());
  } while (is_standard_sel(lay.knob_sel) || lay.knob_sel == lay.setter_sel);
  lay.junk_fns = static_cast<int>(rng() % 3);
  for (int i = 0; i < lay.junk_fns; ++i)
    lay.junk_sels.push_back(static_cast<uint32_t>(rng()) | 1u);
  std::shuffle(lay.order.begin(), lay.order.end(), rng);
  return lay;
}

// Scratch memory convention: 0x00/0x20 hashing, 0x60 local, 0x80 log data.
constexpr uint32_t kLocal = 0x60;
constexpr uint32_t kLogData = 0x80;

void emit_owner_guard(Asm& a, const Layout& lay, const std::string& ok) {
  a.op(op::CALLER).push(lay.owner_slot).op(op::SLOAD).op(op::EQ);
  a.jumpi_to(ok);
  a.revert_here();
  a.label(ok);
}

void emit_return_true(Asm& a) {
  a.push(1).push(0).op(op::MSTORE).push(0x20).push(0).op(op::RETURN);
}

void emit_return_top(Asm& a) {
  // stack: [.., value]
  a.push(0).op(op::MSTORE).push(0x20).push(0).op(op::RETURN);
}

// stack in: [.., map_slot_hash]; applies delta from calldata offset or local.
// Leaves nothing.
void emit_balance_sub_amount(Asm& a, uint32_t amount_off) {
  // slot on stack; bal -= amount
  a.op(op::DUP1).op(op::SLOAD);           // [slot, bal]
  a.calldata_arg(amount_off);             // [slot, bal, amt]
  a.op(op::SWAP1).op(op::SUB);            // [slot, bal-amt]
  a.op(op::SWAP1).op(op::SSTORE);
}

void emit_balance_add_amount(Asm& a, uint32_t amount_off) {
  a.op(op::DUP1).op(op::SLOAD);           // [slot, bal]
  a.calldata_arg(amount_off);             // [slot, bal, amt]
  a.op(op::ADD);                          // [slot, bal+amt]
  a.op(op::SWAP1).op(op::SSTORE);
}

// Transfer(from_on_stack_builder, to, amount-at-kLogData) -- callers stage the
// amount into kLogData and pass pushes for the two address topics.
void emit_transfer_log(Asm& a, const std::function<void(Asm&)>& push_to,
                       const std::function<void(Asm&)>& push_from) {
  push_to(a);
  push_from(a);
  a.push(kTransferTopic, 32);
  a.push(0x20).push(kLogData).op(op::LOG3);
}

// Which transfer-path patterns to emit. The primary risk contributes its own;
// extras are limited to the knob-driven set so one privileged setter arms all
// of them. HM/HBM live in the setter, not here.
struct BodyPlan {
  bool ar = false, tr = false, addr = false, mtr = false, mta = false, mec = false;
};

BodyPlan plan_body(const TokenContractConfig& cfg) {
  BodyPlan bp;
  auto mark = [&](Risk r) {
    switch (r) {
      case Risk::AR: bp.ar = true; break;
      case Risk::TR: bp.tr = true; break;
      case Risk::ADDR: bp.addr = true; break;
      case Risk::MTR: bp.mtr = true; break;
      case Risk::MTA: bp.mta = true; break;
      case Risk::MEC: bp.mec = true; break;
      case Risk::HM:
      case Risk::HBM: break;
    }
  };
  if (cfg.risk) mark(*cfg.risk);
  if (!cfg.extra_risks.empty() && !cfg.risk)
    throw input_error("extra risks need a primary risk");
  for (Risk r : cfg.extra_risks) {
    if (r == Risk::ADDR || r == Risk::HM || r == Risk::HBM)
      throw input_error(std::string("extra risk ") + risk_name(r) +
                        " is not knob-driven; only AR/TR/MTR/MTA/MEC compose");
    mark(r);
  }
  return bp;
}

// The emitters below are shared by transfer and transferFrom; `to_off` and
// `amount_off` select the calldata layout, `pfx` keeps labels distinct per
// function. Each risky check loads its operand in one block and acts on it in
// the next, the way compiled requires split, so the source-to-sink flow
// crosses block boundaries. Twins keep the same shape with the privileged
// load swapped out.

// Sale-restriction head checks (AR, TR, ADDR) before the balance require.
void emit_sale_checks(Asm& a, const Layout& lay, const BodyPlan& bp, bool planted,
                      uint32_t to_off, uint32_t amount_off, const std::string& pfx,
                      const std::string& rev) {
  if (bp.ar) {
    // require(amount <= maxTx); maxTx privileged, twin uses a constant cap
    if (planted)
      a.push(lay.extra_slot).op(op::SLOAD);
    else
      a.push(u256("1000000000000000000000000"));
    a.jump_to(pfx + "_cap");
    a.label(pfx + "_cap");
    a.calldata_arg(amount_off);  // [cap, amt]
    a.op(op::GT);                // amt > cap
    a.jumpi_to(rev);
  }
  if (bp.tr) {
    // require(block.timestamp >= launchTime); launch privileged vs constant
    if (planted)
      a.push(lay.extra_slot).op(op::SLOAD);
    else
      a.push(1893456000);
    a.jump_to(pfx + "_gate");
    a.label(pfx + "_gate");
    a.op(op::TIMESTAMP);  // [launch, ts]
    a.op(op::LT);         // ts < launch
    a.jumpi_to(rev);
  }
  if (bp.addr) {
    // require(blacklist[to] == 0); twin reads a map nobody ever writes
    a.calldata_arg(to_off);
    a.jump_to(pfx + "_blchk");
    a.label(pfx + "_blchk");
    a.mapping_slot(lay.bl_map).op(op::SLOAD).op(op::ISZERO);
    a.jumpi_to(pfx + "_blok");
    a.revert_here();
    a.label(pfx + "_blok");
  }
}

// Recipient credit: plain bal[to] += amount, or the taxed MTR variant.
void emit_credit(Asm& a, const Layout& lay, const BodyPlan& bp, bool planted,
                 uint32_t to_off, uint32_t amount_off, const std::string& pfx) {
  if (!bp.mtr) {
    a.calldata_arg(to_off).mapping_slot(lay.bal_map);
    emit_balance_add_amount(a, amount_off);
    return;
  }
  // fee = amount * taxRate / 100; recipient gets amount - fee
  a.calldata_arg(amount_off);
  if (planted)
    a.push(lay.extra_slot).op(op::SLOAD);
  else
    a.push(3);
  a.jump_to(pfx + "_fee");
  a.label(pfx + "_fee");
  a.op(op::MUL).push(100).op(op::SWAP1).op(op::DIV);
  a.push(kLocal).op(op::MSTORE);
  a.calldata_arg(to_off).mapping_slot(lay.bal_map);
  a.op(op::DUP1).op(op::SLOAD);                      // [slot, bal]
  a.calldata_arg(amount_off).op(op::ADD);            // [slot, bal+amt]
  a.push(kLocal).op(op::MLOAD).op(op::SWAP1).op(op::SUB);  // [slot, bal+amt-fee]
  a.op(op::SWAP1).op(op::SSTORE);
}

// Value-routing tails (MTA, MEC) after the balances settle.
void emit_tail_effects(Asm& a, const Layout& lay, const BodyPlan& bp, bool planted,
                       uint32_t amount_off, const std::string& pfx) {
  if (bp.mta) {
    // fee = amount / 50 credited to a routed address
    a.calldata_arg(amount_off).push(50).op(op::SWAP1).op(op::DIV);
    a.push(kLocal).op(op::MSTORE);
    if (planted)
      a.push(lay.extra_slot).op(op::SLOAD);  // taxWallet, privileged
    else
      a.push_addr(u256("0x00000000000000000000000000000000000aabbc"));
    a.jump_to(pfx + "_route");
    a.label(pfx + "_route");
    a.mapping_slot(lay.bal_map);
    a.op(op::DUP1).op(op::SLOAD);
    a.push(kLocal).op(op::MLOAD).op(op::ADD);
    a.op(op::SWAP1).op(op::SSTORE);
  }
  if (bp.mec) {
    // delegate the tail of the transfer logic
    a.push(0).push(0).push(0).push(0);
    if (planted)
      a.push(lay.extra_slot).op(op::SLOAD);
    else
      a.push(lay.unused_slot).op(op::SLOAD);  // never written anywhere
    a.jump_to(pfx + "_del");
    a.label(pfx + "_del");
    a.op(op::GAS).op(op::DELEGATECALL).op(op::POP);
  }
}

}  // namespace

Bytes build_token(const TokenContractConfig& cfg) {
  // Function roster: index -> (selector, body tag). Order of body emission is
  // fixed; dispatch order is permuted by the layout.
  struct Fn {
    uint32_t sel;
    std::string tag;
  };

  bool planted = cfg.risk.has_value() && !cfg.defused;
  Risk risk = cfg.risk.value_or(Risk::AR);
  bool has_risk_cfg = cfg.risk.has_value();
  BodyPlan bp = plan_body(cfg);
  // The primary setter writes the knob except for ADDR (blacklist setter) and
  // HM/HBM (mint/setBalance); extras then get their own knob setter. Emitted
  // for the twin too so planted and defused rosters stay the same size.
  bool needs_knob = !cfg.extra_risks.empty() &&
                    (risk == Risk::ADDR || risk == Risk::HM || risk == Risk::HBM);

  // First pass learns the seed-dependent roster size (junk count), the second
  // replays the same draws with the permutation sized to the final roster.
  size_t base_count =
      3 + (cfg.full_erc20 ? 3 : 0) + (has_risk_cfg ? 1 : 0) + (needs_knob ? 1 : 0);
  Layout lay = make_layout(cfg.seed, 0);
  lay = make_layout(cfg.seed, base_count + lay.junk_fns);

  std::vector<Fn> fns;
  fns.push_back({kSelTotalSupply, "f_totalsupply"});
  fns.push_back({kSelBalanceOf, "f_balanceof"});
  fns.push_back({kSelTransfer, "f_transfer"});
  if (cfg.full_erc20) {
    fns.push_back({kSelTransferFrom, "f_transferfrom"});
    fns.push_back({kSelApprove, "f_approve"});
    fns.push_back({kSelAllowance, "f_allowance"});
  }
  if (has_risk_cfg) fns.push_back({lay.setter_sel, "f_setter"});
  if (needs_knob) fns.push_back({lay.knob_sel, "f_knob"});
  for (int i = 0; i < lay.junk_fns; ++i)
    fns.push_back({lay.junk_sels[i], "f_junk" + std::to_string(i)});

  Asm a;

  // Dispatcher.
  a.push(0).op(op::CALLDATALOAD).push(0xE0).op(op::SHR);
  for (int idx : lay.order) {
    const Fn& fn = fns[idx];
    a.op(op::DUP1).push(fn.sel, 4).op(op::EQ).jumpi_to(fn.tag);
  }
  a.revert_here();

  // totalSupply()
  a.label("f_totalsupply");
  a.push(lay.supply_slot).op(op::SLOAD);
  emit_return_top(a);

  // balanceOf(address)
  a.label("f_balanceof");
  a.calldata_arg(4).mapping_slot(lay.bal_map).op(op::SLOAD);
  emit_return_top(a);

  // transfer(address to, uint256 amount)
  a.label("f_transfer");
  emit_sale_checks(a, lay, bp, planted, 4, 0x24, "t", "t_limit_rev");

  // require(bal[caller] >= amount)
  a.op(op::CALLER).mapping_slot(lay.bal_map).op(op::SLOAD);  // [bal]
  a.calldata_arg(0x24);                                      // [bal, amt]
  a.op(op::GT);                                              // amt > bal
  a.jumpi_to("t_limit_rev");

  // bal[caller] -= amount
  a.op(op::CALLER).mapping_slot(lay.bal_map);
  emit_balance_sub_amount(a, 0x24);

  emit_credit(a, lay, bp, planted, 4, 0x24, "t");
  emit_tail_effects(a, lay, bp, planted, 0x24, "t");

  // emit Transfer(caller, to, amount); return true
  a.calldata_arg(0x24).push(kLogData).op(op::MSTORE);
  emit_transfer_log(
      a, [](Asm& x) { x.calldata_arg(4); }, [](Asm& x) { x.op(op::CALLER); });
  emit_return_true(a);

  // shared revert target for the magnitude checks
  a.label("t_limit_rev");
  a.revert_here();

  if (cfg.full_erc20) {
    // transferFrom(address from, address to, uint256 amount); the risky
    // checks mirror transfer's, like the shared _transfer path they model.
    a.label("f_transferfrom");
    // allowance slot = keccak(caller . keccak(from . allow_map))
    a.calldata_arg(4).mapping_slot(lay.allow_map);  // [inner]
    a.op(op::CALLER).push(0).op(op::MSTORE);
    a.push(0x20).op(op::MSTORE);  // mem[0x20] = inner
    a.push(0x40).push(0).op(op::SHA3);  // [aslot]
    a.op(op::DUP1).op(op::SLOAD);       // [aslot, allow]
    a.calldata_arg(0x44).op(op::GT);    // amt > allow
    a.jumpi_to("tf_rev");
    a.op(op::DUP1).op(op::SLOAD);
    a.calldata_arg(0x44).op(op::SWAP1).op(op::SUB);
    a.op(op::SWAP1).op(op::SSTORE);

    emit_sale_checks(a, lay, bp, planted, 0x24, 0x44, "tf", "tf_rev");

    // require(bal[from] >= amount)
    a.calldata_arg(4).mapping_slot(lay.bal_map).op(op::SLOAD);
    a.calldata_arg(0x44).op(op::GT);
    a.jumpi_to("tf_rev");
    a.calldata_arg(4).mapping_slot(lay.bal_map);
    emit_balance_sub_amount(a, 0x44);

    emit_credit(a, lay, bp, planted, 0x24, 0x44, "tf");
    emit_tail_effects(a, lay, bp, planted, 0x44, "tf");

    a.calldata_arg(0x44).push(kLogData).op(op::MSTORE);
    emit_transfer_log(
        a, [](Asm& x) { x.calldata_arg(0x24); }, [](Asm& x) { x.calldata_arg(4); });
    emit_return_true(a);
    a.label("tf_rev");
    a.revert_here();

    // approve(address spender, uint256 amount)
    a.label("f_approve");
    a.op(op::CALLER).mapping_slot(lay.allow_map);  // [inner]
    a.calldata_arg(4).push(0).op(op::MSTORE);
    a.push(0x20).op(op::MSTORE);
    a.push(0x40).push(0).op(op::SHA3);   // [slot]
    a.calldata_arg(0x24).op(op::SWAP1).op(op::SSTORE);
    emit_return_true(a);

    // allowance(address owner, address spender)
    a.label("f_allowance");
    a.calldata_arg(4).mapping_slot(lay.allow_map);
    a.calldata_arg(0x24).push(0).op(op::MSTORE);
    a.push(0x20).op(op::MSTORE);
    a.push(0x40).push(0).op(op::SHA3).op(op::SLOAD);
    emit_return_top(a);
  }

  if (has_risk_cfg) {
    a.label("f_setter");
    switch (risk) {
      case Risk::AR:
      case Risk::TR:
      case Risk::MTR:
      case Risk::MTA:
      case Risk::MEC: {
        // setKnob(uint256 v) onlyOwner { knob = v; }
        // Twins for ADDR/HBM keep a knob setter too so every fixture has a
        // privileged function.
        emit_owner_guard(a, lay, "s_ok");
        a.calldata_arg(4).push(lay.extra_slot).op(op::SSTORE);
        a.op(op::STOP);
        break;
      }
      case Risk::ADDR: {
        if (!cfg.defused) {
          // blacklist(address who) onlyOwner { bl[who] = 1; }
          emit_owner_guard(a, lay, "s_ok");
          a.calldata_arg(4).mapping_slot(lay.bl_map);
          a.push(1).op(op::SWAP1).op(op::SSTORE);
          a.op(op::STOP);
        } else {
          // twin: the blacklist map is never written; knob setter instead
          emit_owner_guard(a, lay, "s_ok");
          a.calldata_arg(4).push(lay.extra_slot).op(op::SSTORE);
          a.op(op::STOP);
        }
        break;
      }
      case Risk::HM: {
        // mint(address to, uint256 amount) onlyOwner; the balance bump and
        // the supply bump land in separate blocks
        emit_owner_guard(a, lay, "s_ok");
        a.calldata_arg(4).mapping_slot(lay.bal_map);
        emit_balance_add_amount(a, 0x24);
        a.jump_to("m_sup");
        a.label("m_sup");
        a.push(lay.supply_slot).op(op::SLOAD);
        a.calldata_arg(0x24).op(op::ADD);
        a.push(lay.supply_slot).op(op::SSTORE);
        if (cfg.defused) {
          // twin mints loudly: Transfer(0x0, to, amount)
          a.calldata_arg(0x24).push(kLogData).op(op::MSTORE);
          emit_transfer_log(
              a, [](Asm& x) { x.calldata_arg(4); }, [](Asm& x) { x.push(0); });
        }
        a.op(op::STOP);
        break;
      }
      case Risk::HBM: {
        emit_owner_guard(a, lay, "s_ok");
        if (!cfg.defused) {
          // setBalance(address who, uint256 v) onlyOwner { bal[who] = v; };
          // the target address loads a block ahead of the write
          a.calldata_arg(0x24).push(kLocal).op(op::MSTORE);
          a.calldata_arg(4);
          a.jump_to("s_put");
          a.label("s_put");
          a.mapping_slot(lay.bal_map);
          a.push(kLocal).op(op::MLOAD).op(op::SWAP1).op(op::SSTORE);
        } else {
          // twin: owner can zero only their own balance
          a.op(op::CALLER);
          a.jump_to("s_put");
          a.label("s_put");
          a.mapping_slot(lay.bal_map);
          a.push(0).op(op::SWAP1).op(op::SSTORE);
        }
        a.op(op::STOP);
        break;
      }
    }
  }

  if (needs_knob) {
    // setKnob twin for rosters whose primary setter writes something else
    a.label("f_knob");
    emit_owner_guard(a, lay, "k_ok");
    a.calldata_arg(4).push(lay.extra_slot).op(op::SSTORE);
    a.op(op::STOP);
  }

  for (int i = 0; i < lay.junk_fns; ++i) {
    a.label("f_junk" + std::to_string(i));
    a.push((cfg.seed >> (8 * i)) & 0xff).push(0).op(op::MSTORE);
    a.push(0x20).push(0).op(op::RETURN);
  }

  return a.assemble();
}

}  // namespace rugscan

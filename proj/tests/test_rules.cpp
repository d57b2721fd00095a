#include <set>

#include "doctest.h"
#include "rugscan/asm.hpp"
#include "rugscan/facts.hpp"
#include "rugscan/rules.hpp"
#include "rugscan/srcg.hpp"
#include "rugscan/token_builder.hpp"

using namespace rugscan;

namespace {

const Risk kAllRisks[] = {Risk::AR,  Risk::TR,  Risk::ADDR, Risk::MTR,
                          Risk::MTA, Risk::MEC, Risk::HM,   Risk::HBM};

std::set<Risk> risk_set(const std::vector<RiskFinding>& findings) {
  std::set<Risk> out;
  for (const auto& f : findings) out.insert(f.risk);
  return out;
}

}  // namespace

TEST_CASE("risk names round trip") {
  for (Risk r : kAllRisks) {
    Risk back;
    REQUIRE(risk_from_name(risk_name(r), back));
    CHECK(back == r);
  }
  Risk dummy;
  CHECK(!risk_from_name("NOPE", dummy));
}

TEST_CASE("category assignment") {
  CHECK(category_of(Risk::AR) == RiskCategory::SaleRestrict);
  CHECK(category_of(Risk::TR) == RiskCategory::SaleRestrict);
  CHECK(category_of(Risk::ADDR) == RiskCategory::SaleRestrict);
  CHECK(category_of(Risk::MTR) == RiskCategory::VariableManipulation);
  CHECK(category_of(Risk::MTA) == RiskCategory::VariableManipulation);
  CHECK(category_of(Risk::MEC) == RiskCategory::VariableManipulation);
  CHECK(category_of(Risk::HM) == RiskCategory::BalanceTamper);
  CHECK(category_of(Risk::HBM) == RiskCategory::BalanceTamper);
}

// The core matrix: each planted pattern must be found, and must be the only
// finding on its fixture. Off-diagonal hits mean a matcher is too loose.
TEST_CASE("each planted risk is detected exactly") {
  for (Risk r : kAllRisks) {
    CAPTURE(risk_name(r));
    auto findings = scan_code_risks(risk_fixture(r));
    auto got = risk_set(findings);
    REQUIRE(got.count(r) == 1);
    CHECK(got.size() == 1);
  }
}

TEST_CASE("defused twins stay clean") {
  for (Risk r : kAllRisks) {
    CAPTURE(risk_name(r));
    auto findings = scan_code_risks(risk_fixture(r, /*defused=*/true));
    CHECK(findings.empty());
  }
}

TEST_CASE("benign erc20 has no findings") {
  CHECK(scan_code_risks(benign_erc20(0, false)).empty());
  CHECK(scan_code_risks(benign_erc20(0, true)).empty());
}

TEST_CASE("detection is layout invariant") {
  // Randomized storage slots, selector, dispatch order and junk functions
  // must not affect what the rules see.
  for (Risk r : kAllRisks) {
    for (uint64_t seed : {1u, 7u, 1337u}) {
      CAPTURE(risk_name(r));
      CAPTURE(seed);
      auto got = risk_set(scan_code_risks(risk_fixture(r, false, seed)));
      REQUIRE(got.count(r) == 1);
      CHECK(got.size() == 1);
      CHECK(scan_code_risks(risk_fixture(r, true, seed)).empty());
    }
    CHECK(scan_code_risks(benign_erc20(42, true)).empty());
  }
}

TEST_CASE("findings carry blocks and a witness") {
  auto findings = scan_code_risks(risk_fixture(Risk::AR));
  REQUIRE(findings.size() == 1);
  const auto& f = findings[0];
  CHECK(f.risk == Risk::AR);
  CHECK(f.category == RiskCategory::SaleRestrict);
  CHECK(!f.cb.empty());
  CHECK(!f.witness.empty());
  // Flow endpoints must reference existing blocks.
  auto g = lift(risk_fixture(Risk::AR));
  for (const auto& [a, b] : f.cf) {
    CHECK(g.has_block(a));
    CHECK(g.has_block(b));
  }
  for (int32_t b : f.cb) CHECK(g.has_block(b));
}

// Blacklist check split across blocks: the address argument loads in the
// transfer entry block, the mapping zero-test sits in a second block guarding
// a revert. Source and sink land in different blocks, so the finding must
// carry the connecting flow.
TEST_CASE("cross block blacklist yields critical flow pairs") {
  Asm a;
  a.push(0).op(op::CALLDATALOAD).push(0xE0).op(op::SHR);
  a.op(op::DUP1).push(kSelTransfer, 4).op(op::EQ).jumpi_to("t");
  a.op(op::DUP1).push(0x00000051, 4).op(op::EQ).jumpi_to("s");
  a.revert_here();

  a.label("t");
  a.calldata_arg(4);        // recipient address, carried into the next block
  a.jump_to("tcheck");
  a.label("tcheck");
  a.mapping_slot(4).op(op::SLOAD).op(op::ISZERO).jumpi_to("tok");
  a.revert_here();
  a.label("tok");
  a.op(op::STOP);

  a.label("s");  // onlyOwner blacklist setter: bl[arg] = 1
  a.op(op::CALLER).push(0).op(op::SLOAD).op(op::EQ).jumpi_to("sok");
  a.revert_here();
  a.label("sok");
  a.calldata_arg(4).mapping_slot(4);
  a.push(1).op(op::SWAP1).op(op::SSTORE).op(op::STOP);

  Bytes code = a.assemble();
  auto g = lift(code);
  Facts facts = derive_base_facts(g);
  auto findings = match_rules(facts, g);

  REQUIRE(findings.size() == 1);
  const auto& f = findings[0];
  CHECK(f.risk == Risk::ADDR);
  CHECK(f.cb.size() >= 2);
  REQUIRE(!f.cf.empty());
  for (const auto& [x, y] : f.cf) {
    CHECK(g.has_block(x));
    CHECK(g.has_block(y));
    bool real = g.cf_edges.count({x, y}) || g.dd_edges.count({x, y});
    CHECK(real);
  }

  // Critical edge marks mirror the flow set exactly.
  auto srcg = build_srcg(g, findings);
  std::set<std::pair<int32_t, int32_t>> crit;
  for (const auto& e : srcg.edges)
    if (e.type == EdgeType::Critical) crit.emplace(e.src, e.dst);
  CHECK(crit == f.cf);
}

TEST_CASE("findings are deterministic") {
  auto f1 = scan_code_risks(risk_fixture(Risk::MTR));
  auto f2 = scan_code_risks(risk_fixture(Risk::MTR));
  REQUIRE(f1.size() == f2.size());
  for (size_t i = 0; i < f1.size(); ++i) {
    CHECK(f1[i].risk == f2[i].risk);
    CHECK(f1[i].cb == f2[i].cb);
    CHECK(f1[i].cf == f2[i].cf);
    CHECK(f1[i].witness == f2[i].witness);
  }
}

TEST_CASE("results sorted by risk enum") {
  // A fixture with two independent risks: splice is impractical here, so we
  // at least pin the ordering contract on single-risk outputs across risks.
  for (Risk r : kAllRisks) {
    auto findings = scan_code_risks(risk_fixture(r));
    for (size_t i = 1; i < findings.size(); ++i)
      CHECK(static_cast<int>(findings[i - 1].risk) < static_cast<int>(findings[i].risk));
  }
}

TEST_CASE("semantic graph marks critical nodes and edges") {
  Bytes code = risk_fixture(Risk::ADDR);
  auto g = lift(code);
  Facts facts = derive_base_facts(g);
  auto findings = match_rules(facts, g);
  REQUIRE(!findings.empty());
  auto srcg = build_srcg(g, findings);

  // Node ids ascend and mirror the block set.
  REQUIRE(srcg.nodes.size() == g.blocks.size());
  for (size_t i = 1; i < srcg.nodes.size(); ++i)
    CHECK(srcg.nodes[i - 1].block < srcg.nodes[i].block);

  size_t critical_nodes = 0, critical_edges = 0;
  std::set<int32_t> cb;
  for (const auto& f : findings) cb.insert(f.cb.begin(), f.cb.end());
  for (const auto& n : srcg.nodes) {
    if (n.type == NodeType::Critical) {
      ++critical_nodes;
      CHECK(cb.count(n.block) == 1);
    }
  }
  CHECK(critical_nodes == cb.size());
  std::set<std::pair<int32_t, int32_t>> cf_union;
  for (const auto& f : findings) cf_union.insert(f.cf.begin(), f.cf.end());
  for (const auto& e : srcg.edges)
    if (e.type == EdgeType::Critical) ++critical_edges;
  CHECK(critical_edges == cf_union.size());

  // Every SRCG edge exists in the union of control and data edges.
  for (const auto& e : srcg.edges) {
    bool in_cf = g.cf_edges.count({e.src, e.dst}) != 0;
    bool in_dd = g.dd_edges.count({e.src, e.dst}) != 0;
    CHECK((in_cf || in_dd));
  }

  // Benign code yields no critical marks.
  auto benign = lift(benign_erc20());
  auto srcg2 = build_srcg(benign, {});
  for (const auto& n : srcg2.nodes) CHECK(n.type != NodeType::Critical);
  for (const auto& e : srcg2.edges) CHECK(e.type != EdgeType::Critical);
}

// Contracts can stack several planted patterns: the primary risk plus extra
// knob-driven ones. Every planted risk must fire, nothing else, and the
// defused twin of the same stack stays silent.
TEST_CASE("stacked risks are each detected") {
  TokenContractConfig cfg;
  cfg.risk = Risk::HM;
  cfg.extra_risks = {Risk::AR, Risk::MTA};
  cfg.full_erc20 = true;

  auto findings = scan_code_risks(build_token(cfg));
  CHECK(risk_set(findings) == std::set<Risk>{Risk::AR, Risk::MTA, Risk::HM});

  cfg.defused = true;
  CHECK(scan_code_risks(build_token(cfg)).empty());

  // Layout scrambling must not shake any of the stacked patterns loose.
  cfg.defused = false;
  cfg.seed = 99;
  findings = scan_code_risks(build_token(cfg));
  CHECK(risk_set(findings) == std::set<Risk>{Risk::AR, Risk::MTA, Risk::HM});
}

// With the full ERC-20 surface the transfer-path patterns appear in both
// transfer and transferFrom, so each finding carries two separate flows.
TEST_CASE("transfer checks mirror into transferFrom") {
  TokenContractConfig cfg;
  cfg.risk = Risk::AR;
  cfg.full_erc20 = true;
  auto findings = scan_code_risks(build_token(cfg));
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].cf.size() >= 2);
  CHECK(findings[0].cb.size() >= 4);

  // The slim fixture has only transfer, so a single flow.
  auto slim = scan_code_risks(risk_fixture(Risk::AR));
  REQUIRE(slim.size() == 1);
  CHECK(slim[0].cf.size() == 1);
}

TEST_CASE("extra risks reject patterns that need their own setter") {
  TokenContractConfig cfg;
  cfg.risk = Risk::AR;
  cfg.extra_risks = {Risk::HBM};
  CHECK_THROWS_AS(build_token(cfg), Error);
  cfg.extra_risks = {Risk::HM};
  CHECK_THROWS_AS(build_token(cfg), Error);
  cfg.extra_risks = {Risk::ADDR};
  CHECK_THROWS_AS(build_token(cfg), Error);
}

// Removing code the simulator never reaches must not change any verdict:
// facts are derived from executed paths only.
TEST_CASE("dead code does not perturb findings") {
  for (Risk r : {Risk::AR, Risk::HM}) {
    Bytes code = risk_fixture(r);
    Bytes padded = code;
    // Unreachable tail: a JUMPDEST-free run of arithmetic.
    for (uint8_t b : {0x60, 0x01, 0x60, 0x02, 0x01, 0x00}) padded.push_back(b);
    auto base = risk_set(scan_code_risks(code));
    auto more = risk_set(scan_code_risks(padded));
    CHECK(base == more);
  }
}

#include "rugscan/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nlohmann/json.hpp"
#include "rugscan/common.hpp"
#include "rugscan/token_builder.hpp"

namespace rugscan {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string synth_addr(uint64_t salt, uint64_t holder) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "0x%016llx%016llx%08llx",
                static_cast<unsigned long long>(salt),
                static_cast<unsigned long long>(mix(salt, holder)),
                static_cast<unsigned long long>(holder & 0xffffffffULL));
  return buf;
}

std::string synth_tx(uint64_t salt, uint64_t counter) {
  char buf[72];
  std::snprintf(buf, sizeof buf, "0x%016llx%016llx%016llx%016llx",
                static_cast<unsigned long long>(salt),
                static_cast<unsigned long long>(mix(salt, counter)),
                static_cast<unsigned long long>(counter),
                static_cast<unsigned long long>(0xfeedfaceULL));
  return buf;
}

// Running token-flow simulation with per-holder balances so transfer amounts
// stay plausible without any bookkeeping in the consumers.
struct Trace {
  std::mt19937_64& rng;
  uint64_t salt;
  unsigned decimals;
  int64_t t;
  uint64_t txc = 0;
  std::vector<std::string> holders;
  std::vector<bigint> balance;
  std::vector<TransferEvent> events;

  Trace(std::mt19937_64& r, uint64_t s, unsigned dec, int64_t start)
      : rng(r), salt(s), decimals(dec), t(start) {}

  size_t new_holder() {
    holders.push_back(synth_addr(salt, 0x1000 + holders.size()));
    balance.push_back(0);
    return holders.size() - 1;
  }

  uint64_t gas() { return 45000 + rng() % 200000; }

  void transfer(const std::string& from, size_t to, const bigint& amount) {
    TransferEvent e;
    e.tx_hash = synth_tx(salt, txc++);
    e.log_index = 0;
    e.timestamp = t;
    e.from = from;
    e.to = holders[to];
    e.value = amount;
    e.gas_limit = gas();
    e.kind = EventKind::Transfer;
    events.push_back(std::move(e));
  }

  void move_tokens(size_t from, size_t to, const bigint& amount) {
    bigint amt = std::min(amount, balance[from]);
    transfer(holders[from], to, amt);
    balance[from] -= amt;
    balance[to] += amt;
  }

  void approval(size_t owner, size_t spender) {
    TransferEvent e;
    e.tx_hash = synth_tx(salt, txc++);
    e.log_index = 0;
    e.timestamp = t;
    e.from = holders[owner];
    e.to = holders[spender];
    e.value = balance[owner];
    e.gas_limit = gas();
    e.kind = EventKind::Approval;
    events.push_back(std::move(e));
  }

  // fraction in percent of the sender's balance
  bigint cut(size_t from, unsigned lo_pct, unsigned hi_pct) {
    unsigned pct = lo_pct + rng() % (hi_pct - lo_pct + 1);
    return balance[from] * pct / 100;
  }
};

const std::string kZeroAddr = "0x0000000000000000000000000000000000000000";

// Creator receives the whole supply in a mint from the zero address.
void mint_supply(Trace& tr) {
  size_t creator = tr.new_holder();
  bigint unit = boost::multiprecision::pow(bigint(10), tr.decimals);
  bigint supply = bigint(500000 + tr.rng() % 9500000) * unit;
  tr.t += 30 + tr.rng() % 600;
  tr.transfer(kZeroAddr, creator, supply);
  tr.balance[creator] = supply;
}

size_t pick_funded(Trace& tr) {
  // Prefer holders that actually hold something; fall back to the creator.
  for (int tries = 0; tries < 8; ++tries) {
    size_t i = tr.rng() % tr.holders.size();
    if (tr.balance[i] > 0) return i;
  }
  return 0;
}

// Gradual distribution with occasional approvals: the shape every token
// shares, and the whole story for benign ones.
void organic_phase(Trace& tr, size_t steps) {
  for (size_t i = 0; i < steps; ++i) {
    tr.t += 300 + tr.rng() % 14000;
    if (tr.rng() % 100 < 8 && tr.holders.size() >= 2) {
      size_t owner = pick_funded(tr);
      size_t spender = tr.rng() % tr.holders.size();
      if (owner != spender) {
        tr.approval(owner, spender);
        continue;
      }
    }
    // The creator dominates early distribution, peers take over later.
    size_t from;
    if (tr.rng() % 100 < std::max<size_t>(60 - i * 60 / std::max<size_t>(steps, 1), 15))
      from = 0;
    else
      from = pick_funded(tr);
    size_t to;
    if (tr.rng() % 100 < 35 || tr.holders.size() < 3) to = tr.new_holder();
    else do { to = tr.rng() % tr.holders.size(); } while (to == from);
    tr.move_tokens(from, to, tr.cut(from, 5, 44));
  }
}

// Wash bursts among a colluder ring, consolidation back to the creator, then
// a fast dump to fresh addresses.
void manipulation_phase(Trace& tr) {
  size_t ring = 3 + tr.rng() % 3;
  std::vector<size_t> colluders;
  for (size_t i = 0; i < ring; ++i) {
    size_t c = tr.new_holder();
    tr.t += 200 + tr.rng() % 3000;
    tr.move_tokens(0, c, tr.cut(0, 8, 16));
    colluders.push_back(c);
  }

  size_t bursts = 2 + tr.rng() % 3;
  for (size_t b = 0; b < bursts; ++b) {
    tr.t += 2000 + tr.rng() % 20000;
    // Allowances granted right before the burst flip the approve flag on the
    // wash edges that follow.
    for (size_t k = 0; k + 1 < colluders.size(); ++k) {
      tr.approval(colluders[k], colluders[k + 1]);
      tr.t += 5 + tr.rng() % 40;
    }
    size_t hops = 10 + tr.rng() % 13;
    for (size_t h = 0; h < hops; ++h) {
      tr.t += 1 + tr.rng() % 80;
      size_t from = colluders[h % ring];
      size_t to = colluders[(h + 1 + tr.rng() % (ring - 1)) % ring];
      if (from == to) to = colluders[(h + 1) % ring];
      tr.move_tokens(from, to, tr.cut(from, 55, 95));
    }
  }

  // Sweep the ring's holdings home, then drain.
  for (size_t c : colluders) {
    tr.t += 20 + tr.rng() % 500;
    tr.move_tokens(c, 0, tr.cut(c, 90, 99));
  }
  size_t exits = 2 + tr.rng() % 2;
  for (size_t i = 0; i < exits; ++i) {
    size_t sink = tr.new_holder();
    tr.t += 30 + tr.rng() % 240;
    tr.move_tokens(0, sink, tr.cut(0, 55, 90));
  }
}

// One primary risk of the eight plus one or two knob-driven extras: rug
// contracts in the wild rarely ship a single trick, and the twins replay the
// same draw so the benign pool keeps matching shape for shape.
void draw_risks(std::mt19937_64& rng, TokenContractConfig& cfg) {
  cfg.risk = static_cast<Risk>(rng() % 8);
  static const Risk knob[] = {Risk::AR, Risk::TR, Risk::MTR, Risk::MTA, Risk::MEC};
  size_t extras = 1 + rng() % 2;
  for (size_t i = 0; i < extras; ++i) {
    Risk r = knob[rng() % 5];
    bool dup = r == *cfg.risk;
    for (Risk e : cfg.extra_risks) dup = dup || e == r;
    if (!dup) cfg.extra_risks.push_back(r);
  }
}

Bytes rug_code(std::mt19937_64& rng) {
  TokenContractConfig cfg;
  draw_risks(rng, cfg);
  cfg.seed = rng();
  cfg.full_erc20 = true;
  return build_token(cfg);
}

// Benign pool: half vanilla tokens, half defused twins of the risky layouts,
// so code texture alone cannot separate the classes.
Bytes clean_code(std::mt19937_64& rng) {
  if (rng() % 2) return benign_erc20(rng(), true);
  TokenContractConfig cfg;
  draw_risks(rng, cfg);
  cfg.defused = true;
  cfg.seed = rng();
  cfg.full_erc20 = true;
  return build_token(cfg);
}

SynthToken make_token(uint64_t seed, uint64_t index, int label, SynthSignal signal,
                      const std::string& id) {
  std::mt19937_64 rng(mix(seed, index));
  uint64_t salt = mix(seed, 0x70000 + index);

  SynthToken tok;
  tok.id = id;
  tok.label = label;
  tok.signal = signal;

  unsigned decimals;
  switch (rng() % 5) {
    case 0: decimals = 6; break;
    case 1: decimals = 9; break;
    default: decimals = 18; break;
  }
  int64_t creation = 1500000000 + static_cast<int64_t>(rng() % 150000000);

  auto& token = tok.bundle.token;
  token.address = synth_addr(salt, 0xc0);
  token.decimals = decimals;
  token.creation_timestamp = creation;

  bool risky_code = signal == SynthSignal::Both || signal == SynthSignal::CodeOnly;
  bool manipulated = signal == SynthSignal::Both || signal == SynthSignal::TxOnly;
  token.bytecode = risky_code ? rug_code(rng) : clean_code(rng);

  Trace tr(rng, salt, decimals, creation);
  mint_supply(tr);
  token.creator = tr.holders[0];
  if (manipulated) {
    organic_phase(tr, 15 + rng() % 25);  // cover trickle
    manipulation_phase(tr);
    organic_phase(tr, 5 + rng() % 10);   // stragglers
  } else {
    organic_phase(tr, 80 + rng() % 120);
  }
  tok.bundle.events = std::move(tr.events);
  return tok;
}

}  // namespace

const char* synth_signal_name(SynthSignal s) {
  switch (s) {
    case SynthSignal::None: return "none";
    case SynthSignal::CodeOnly: return "code-only";
    case SynthSignal::TxOnly: return "tx-only";
    case SynthSignal::Both: return "both";
  }
  return "?";
}

std::vector<SynthToken> make_benchmark(const SynthSpec& spec) {
  std::vector<SynthToken> out;
  out.reserve(spec.rug_count + spec.benign_count);
  char name[32];
  for (size_t i = 0; i < spec.rug_count; ++i) {
    SynthSignal mode = i % 3 == 0   ? SynthSignal::Both
                       : i % 3 == 1 ? SynthSignal::CodeOnly
                                    : SynthSignal::TxOnly;
    std::snprintf(name, sizeof name, "rug-%03zu", i);
    out.push_back(make_token(spec.seed, i, 1, mode, name));
  }
  for (size_t i = 0; i < spec.benign_count; ++i) {
    std::snprintf(name, sizeof name, "benign-%03zu", i);
    out.push_back(make_token(spec.seed, 100000 + i, 0, SynthSignal::None, name));
  }
  return out;
}

void write_benchmark(const std::string& dir, const std::vector<SynthToken>& tokens) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "bundles");

  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw input_error("cannot write manifest under " + dir);
  nlohmann::ordered_json signals;
  for (const auto& tok : tokens) {
    std::string rel = "bundles/" + tok.id;
    save_bundle((fs::path(dir) / rel).string(), tok.bundle);
    nlohmann::ordered_json row;
    row["id"] = tok.id;
    row["label"] = tok.label;
    row["bundle_path"] = rel;
    manifest << row.dump() << "\n";
    signals[tok.id] = synth_signal_name(tok.signal);
  }
  manifest.flush();
  if (!manifest) throw internal_error("short write on manifest under " + dir);

  std::ofstream sig(fs::path(dir) / "signals.json");
  if (!sig) throw input_error("cannot write signals.json under " + dir);
  sig << signals.dump(2) << "\n";
}

}  // namespace rugscan

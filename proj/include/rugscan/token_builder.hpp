#pragma once

#include <cstdint>
#include <optional>

#include "rugscan/asm.hpp"
#include "rugscan/rules.hpp"

namespace rugscan {

// Builds runtime bytecode for a dispatcher-based ERC-20-style token.
// `risk` plants one rule-triggering pattern; `defused` swaps in the
// structurally similar but benign variant (the "twin"). seed randomizes
// cosmetics only: storage layout, setter selector, dispatch order, junk view
// functions. seed 0 is the canonical layout used by the hand-checked
// fixtures.
//
// `extra_risks` plants additional patterns next to the primary one. Only the
// knob-driven transfer-path risks (AR, TR, MTR, MTA, MEC) are allowed there:
// they all read the same privileged knob slot, so a single setter arms every
// one of them. When the primary risk's setter does not write the knob, a
// second privileged setter is emitted for the extras.
struct TokenContractConfig {
  std::optional<Risk> risk;
  std::vector<Risk> extra_risks;
  bool defused = false;
  uint64_t seed = 0;
  bool full_erc20 = false;  // also emit transferFrom/approve/allowance
};

Bytes build_token(const TokenContractConfig& cfg);

// Shorthands for the fixture matrix.
inline Bytes risk_fixture(Risk r, bool defused = false, uint64_t seed = 0) {
  TokenContractConfig cfg;
  cfg.risk = r;
  cfg.defused = defused;
  cfg.seed = seed;
  return build_token(cfg);
}

inline Bytes benign_erc20(uint64_t seed = 0, bool full = true) {
  TokenContractConfig cfg;
  cfg.seed = seed;
  cfg.full_erc20 = full;
  return build_token(cfg);
}

}  // namespace rugscan

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rugscan/events.hpp"

namespace rugscan {

// What a generated token's label is allowed to rest on. Code-only rugs pair
// risky bytecode with an organic trace; tx-only rugs pair clean bytecode with
// a manipulation trace; Both plants both signals. Benign tokens are None.
enum class SynthSignal : int { None = 0, CodeOnly, TxOnly, Both };
const char* synth_signal_name(SynthSignal s);

struct SynthSpec {
  uint64_t seed = 1;
  size_t rug_count = 100;
  size_t benign_count = 150;
};

struct SynthToken {
  std::string id;
  int label = 0;
  SynthSignal signal = SynthSignal::None;
  TokenBundle bundle;
};

// Deterministic benchmark: rug tokens cycle through Both/CodeOnly/TxOnly.
// The bytecode pool of tx-only rugs matches the benign pool and the trace
// generator of code-only rugs matches the benign one, so each single-signal
// class is invisible to the branch that cannot see its signal.
std::vector<SynthToken> make_benchmark(const SynthSpec& spec);

// Writes one bundle directory per token plus manifest.jsonl ({id, label,
// bundle_path} per line) and signals.json (id -> planted signal mode).
void write_benchmark(const std::string& dir, const std::vector<SynthToken>& tokens);

}  // namespace rugscan

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rugscan/common.hpp"
#include "rugscan/opcodes.hpp"

namespace rugscan {

struct Instruction {
  uint32_t offset = 0;
  uint8_t opcode = 0;   // raw byte, kept even for unassigned values
  Bytes immediate;      // PUSH payload, zero-padded if the code was truncated

  const char* mnemonic() const { return opcode_info(opcode).name; }
  // PUSH payload as a 256-bit word (zero for non-push).
  u256 push_value() const;
};

struct DisasmResult {
  std::vector<Instruction> instructions;
  size_t code_len = 0;            // bytes actually disassembled (metadata excluded)
  size_t metadata_len = 0;        // stripped CBOR trailer length, 0 if none
  bool truncated_push = false;    // last PUSH ran off the end of the code
};

// Strips the Solidity CBOR metadata trailer if one is present.  The trailer
// is <cbor blob><2-byte big-endian length>; we only strip when the length is
// plausible and the blob starts with a small CBOR map header, since random
// code endings can look like a length field.
// Returns the number of trailing bytes to ignore (0 if none found).
size_t metadata_trailer_len(const Bytes& code);

// Linear-sweep disassembly over the runtime code.  PUSH immediates that run
// past the end are padded with zeros and flagged instead of failing: truncated
// inputs appear in the wild and we still want the prefix.
DisasmResult disassemble(const Bytes& code, bool strip_metadata = true);

// Re-encodes instructions back to bytes.  Round-trips exactly with
// disassemble() on non-truncated input; used as the disassembler oracle.
Bytes reassemble(const std::vector<Instruction>& instructions);

}  // namespace rugscan

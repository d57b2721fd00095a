#pragma once

#include <map>
#include <string>
#include <vector>

#include "rugscan/common.hpp"
#include "rugscan/opcodes.hpp"

namespace rugscan {

// Tiny two-pass EVM assembler for building fixture bytecode. Labels assemble
// to PUSH2 immediates; label() also emits the JUMPDEST so jump targets are
// always valid. Throws Input errors on undefined or duplicate labels.
class Asm {
 public:
  Asm& op(uint8_t opcode);
  Asm& op(const std::string& mnemonic);
  // Minimal-width PUSH unless width given (1..32).
  Asm& push(const u256& value, int width = 0);
  Asm& push_label(const std::string& name);
  // Defines `name` here and emits a JUMPDEST.
  Asm& label(const std::string& name);

  // Common fragments.
  Asm& push_addr(const u256& value) { return push(value, 20); }
  Asm& jump_to(const std::string& name) { return push_label(name).op(op::JUMP); }
  Asm& jumpi_to(const std::string& name) { return push_label(name).op(op::JUMPI); }
  // PUSH1 0 DUP1 REVERT
  Asm& revert_here();
  // CALLDATALOAD at const offset.
  Asm& calldata_arg(uint32_t byte_offset);
  // Scratch-memory keccak of (key_on_stack, slot): MSTORE 0, PUSH slot,
  // MSTORE 0x20, SHA3(0, 0x40). Consumes the key from the stack, leaves hash.
  Asm& mapping_slot(const u256& base_slot);

  Bytes assemble() const;
  size_t size_estimate() const { return items_.size() * 3; }

 private:
  struct Item {
    enum class Kind { Op, Push, PushLabel, Label } kind;
    uint8_t opcode = 0;
    u256 value = 0;
    int width = 0;
    std::string name;
  };
  std::vector<Item> items_;
};

}  // namespace rugscan

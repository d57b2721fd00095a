#pragma once

#include <cstdint>
#include <string>

namespace rugscan {

// Byte values for the opcodes the lifter cares about by name. Everything else
// is handled generically through the info table.
namespace op {
constexpr uint8_t STOP = 0x00;
constexpr uint8_t ADD = 0x01;
constexpr uint8_t MUL = 0x02;
constexpr uint8_t SUB = 0x03;
constexpr uint8_t DIV = 0x04;
constexpr uint8_t SDIV = 0x05;
constexpr uint8_t MOD = 0x06;
constexpr uint8_t EXP = 0x0a;
constexpr uint8_t LT = 0x10;
constexpr uint8_t GT = 0x11;
constexpr uint8_t SLT = 0x12;
constexpr uint8_t SGT = 0x13;
constexpr uint8_t EQ = 0x14;
constexpr uint8_t ISZERO = 0x15;
constexpr uint8_t AND = 0x16;
constexpr uint8_t OR = 0x17;
constexpr uint8_t XOR = 0x18;
constexpr uint8_t NOT = 0x19;
constexpr uint8_t SHL = 0x1b;
constexpr uint8_t SHR = 0x1c;
constexpr uint8_t SAR = 0x1d;
constexpr uint8_t SHA3 = 0x20;
constexpr uint8_t ADDRESS = 0x30;
constexpr uint8_t BALANCE = 0x31;
constexpr uint8_t ORIGIN = 0x32;
constexpr uint8_t CALLER = 0x33;
constexpr uint8_t CALLVALUE = 0x34;
constexpr uint8_t CALLDATALOAD = 0x35;
constexpr uint8_t CALLDATASIZE = 0x36;
constexpr uint8_t CALLDATACOPY = 0x37;
constexpr uint8_t TIMESTAMP = 0x42;
constexpr uint8_t NUMBER = 0x43;
constexpr uint8_t POP = 0x50;
constexpr uint8_t MLOAD = 0x51;
constexpr uint8_t MSTORE = 0x52;
constexpr uint8_t MSTORE8 = 0x53;
constexpr uint8_t SLOAD = 0x54;
constexpr uint8_t SSTORE = 0x55;
constexpr uint8_t JUMP = 0x56;
constexpr uint8_t JUMPI = 0x57;
constexpr uint8_t PC = 0x58;
constexpr uint8_t GAS = 0x5a;
constexpr uint8_t JUMPDEST = 0x5b;
constexpr uint8_t PUSH0 = 0x5f;
constexpr uint8_t PUSH1 = 0x60;
constexpr uint8_t PUSH2 = 0x61;
constexpr uint8_t PUSH4 = 0x63;
constexpr uint8_t PUSH32 = 0x7f;
constexpr uint8_t DUP1 = 0x80;
constexpr uint8_t SWAP1 = 0x90;
constexpr uint8_t LOG0 = 0xa0;
constexpr uint8_t LOG3 = 0xa3;
constexpr uint8_t LOG4 = 0xa4;
constexpr uint8_t CREATE = 0xf0;
constexpr uint8_t CALL = 0xf1;
constexpr uint8_t CALLCODE = 0xf2;
constexpr uint8_t RETURN = 0xf3;
constexpr uint8_t DELEGATECALL = 0xf4;
constexpr uint8_t CREATE2 = 0xf5;
constexpr uint8_t STATICCALL = 0xfa;
constexpr uint8_t REVERT = 0xfd;
constexpr uint8_t INVALID = 0xfe;
constexpr uint8_t SELFDESTRUCT = 0xff;
}  // namespace op

struct OpInfo {
  const char* name;   // canonical mnemonic, "INVALID" for unassigned bytes
  uint8_t immediate;  // trailing immediate bytes (nonzero only for PUSH1..32)
  uint8_t pops;
  uint8_t pushes;
  bool defined;       // false for bytes with no assigned opcode
};

// Info for a raw opcode byte. Always returns a usable entry; unassigned bytes
// come back as {"INVALID", 0, 0, 0, false}.
const OpInfo& opcode_info(uint8_t byte);

inline bool is_push(uint8_t byte) { return byte >= op::PUSH1 && byte <= op::PUSH32; }
inline uint8_t push_width(uint8_t byte) { return is_push(byte) ? byte - op::PUSH1 + 1 : 0; }
inline bool is_dup(uint8_t byte) { return byte >= 0x80 && byte <= 0x8f; }
inline bool is_swap(uint8_t byte) { return byte >= 0x90 && byte <= 0x9f; }
inline bool is_log(uint8_t byte) { return byte >= 0xa0 && byte <= 0xa4; }

// Opcodes that end a basic block with no fall-through.
bool is_terminator(uint8_t byte);

// Resolves a mnemonic back to its byte value; returns -1 if unknown.
// Used by the assembler and by tests.
int opcode_from_name(const std::string& name);

}  // namespace rugscan

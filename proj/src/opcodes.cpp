#include "rugscan/opcodes.hpp"

#include <array>
#include <cstdio>
#include <map>

namespace rugscan {

namespace {

struct Table {
  std::array<OpInfo, 256> info;
  std::map<std::string, int> by_name;

  void set(uint8_t byte, const char* name, uint8_t imm, uint8_t pops, uint8_t pushes) {
    info[byte] = OpInfo{name, imm, pops, pushes, true};
    // First writer wins so INVALID maps back to 0xfe, not to random gaps.
    by_name.emplace(name, byte);
  }

  Table() {
    for (int i = 0; i < 256; ++i) info[i] = OpInfo{"INVALID", 0, 0, 0, false};

    set(0x00, "STOP", 0, 0, 0);
    set(0x01, "ADD", 0, 2, 1);
    set(0x02, "MUL", 0, 2, 1);
    set(0x03, "SUB", 0, 2, 1);
    set(0x04, "DIV", 0, 2, 1);
    set(0x05, "SDIV", 0, 2, 1);
    set(0x06, "MOD", 0, 2, 1);
    set(0x07, "SMOD", 0, 2, 1);
    set(0x08, "ADDMOD", 0, 3, 1);
    set(0x09, "MULMOD", 0, 3, 1);
    set(0x0a, "EXP", 0, 2, 1);
    set(0x0b, "SIGNEXTEND", 0, 2, 1);
    set(0x10, "LT", 0, 2, 1);
    set(0x11, "GT", 0, 2, 1);
    set(0x12, "SLT", 0, 2, 1);
    set(0x13, "SGT", 0, 2, 1);
    set(0x14, "EQ", 0, 2, 1);
    set(0x15, "ISZERO", 0, 1, 1);
    set(0x16, "AND", 0, 2, 1);
    set(0x17, "OR", 0, 2, 1);
    set(0x18, "XOR", 0, 2, 1);
    set(0x19, "NOT", 0, 1, 1);
    set(0x1a, "BYTE", 0, 2, 1);
    set(0x1b, "SHL", 0, 2, 1);
    set(0x1c, "SHR", 0, 2, 1);
    set(0x1d, "SAR", 0, 2, 1);
    set(0x20, "SHA3", 0, 2, 1);
    set(0x30, "ADDRESS", 0, 0, 1);
    set(0x31, "BALANCE", 0, 1, 1);
    set(0x32, "ORIGIN", 0, 0, 1);
    set(0x33, "CALLER", 0, 0, 1);
    set(0x34, "CALLVALUE", 0, 0, 1);
    set(0x35, "CALLDATALOAD", 0, 1, 1);
    set(0x36, "CALLDATASIZE", 0, 0, 1);
    set(0x37, "CALLDATACOPY", 0, 3, 0);
    set(0x38, "CODESIZE", 0, 0, 1);
    set(0x39, "CODECOPY", 0, 3, 0);
    set(0x3a, "GASPRICE", 0, 0, 1);
    set(0x3b, "EXTCODESIZE", 0, 1, 1);
    set(0x3c, "EXTCODECOPY", 0, 4, 0);
    set(0x3d, "RETURNDATASIZE", 0, 0, 1);
    set(0x3e, "RETURNDATACOPY", 0, 3, 0);
    set(0x3f, "EXTCODEHASH", 0, 1, 1);
    set(0x40, "BLOCKHASH", 0, 1, 1);
    set(0x41, "COINBASE", 0, 0, 1);
    set(0x42, "TIMESTAMP", 0, 0, 1);
    set(0x43, "NUMBER", 0, 0, 1);
    set(0x44, "PREVRANDAO", 0, 0, 1);
    set(0x45, "GASLIMIT", 0, 0, 1);
    set(0x46, "CHAINID", 0, 0, 1);
    set(0x47, "SELFBALANCE", 0, 0, 1);
    set(0x48, "BASEFEE", 0, 0, 1);
    set(0x50, "POP", 0, 1, 0);
    set(0x51, "MLOAD", 0, 1, 1);
    set(0x52, "MSTORE", 0, 2, 0);
    set(0x53, "MSTORE8", 0, 2, 0);
    set(0x54, "SLOAD", 0, 1, 1);
    set(0x55, "SSTORE", 0, 2, 0);
    set(0x56, "JUMP", 0, 1, 0);
    set(0x57, "JUMPI", 0, 2, 0);
    set(0x58, "PC", 0, 0, 1);
    set(0x59, "MSIZE", 0, 0, 1);
    set(0x5a, "GAS", 0, 0, 1);
    set(0x5b, "JUMPDEST", 0, 0, 0);
    set(0x5f, "PUSH0", 0, 0, 1);
    for (int i = 1; i <= 32; ++i) {
      static char names[32][8];
      std::snprintf(names[i - 1], sizeof(names[i - 1]), "PUSH%d", i);
      set(static_cast<uint8_t>(0x5f + i), names[i - 1], static_cast<uint8_t>(i), 0, 1);
    }
    for (int i = 1; i <= 16; ++i) {
      static char names[16][8];
      std::snprintf(names[i - 1], sizeof(names[i - 1]), "DUP%d", i);
      set(static_cast<uint8_t>(0x7f + i), names[i - 1], 0, static_cast<uint8_t>(i),
          static_cast<uint8_t>(i + 1));
    }
    for (int i = 1; i <= 16; ++i) {
      static char names[16][8];
      std::snprintf(names[i - 1], sizeof(names[i - 1]), "SWAP%d", i);
      set(static_cast<uint8_t>(0x8f + i), names[i - 1], 0, static_cast<uint8_t>(i + 1),
          static_cast<uint8_t>(i + 1));
    }
    for (int i = 0; i <= 4; ++i) {
      static char names[5][8];
      std::snprintf(names[i], sizeof(names[i]), "LOG%d", i);
      set(static_cast<uint8_t>(0xa0 + i), names[i], 0, static_cast<uint8_t>(i + 2), 0);
    }
    set(0xf0, "CREATE", 0, 3, 1);
    set(0xf1, "CALL", 0, 7, 1);
    set(0xf2, "CALLCODE", 0, 7, 1);
    set(0xf3, "RETURN", 0, 2, 0);
    set(0xf4, "DELEGATECALL", 0, 6, 1);
    set(0xf5, "CREATE2", 0, 4, 1);
    set(0xfa, "STATICCALL", 0, 6, 1);
    set(0xfd, "REVERT", 0, 2, 0);
    set(0xfe, "INVALID", 0, 0, 0);
    set(0xff, "SELFDESTRUCT", 0, 1, 0);
  }
};

const Table& table() {
  static Table t;
  return t;
}

}  // namespace

const OpInfo& opcode_info(uint8_t byte) { return table().info[byte]; }

bool is_terminator(uint8_t byte) {
  switch (byte) {
    case op::STOP:
    case op::JUMP:
    case op::RETURN:
    case op::REVERT:
    case op::INVALID:
    case op::SELFDESTRUCT:
      return true;
    default:
      // Unassigned bytes behave like INVALID at runtime: execution halts.
      return !opcode_info(byte).defined;
  }
}

int opcode_from_name(const std::string& name) {
  if (name == "KECCAK256") return op::SHA3;  // post-Constantinople alias
  const auto& m = table().by_name;
  auto it = m.find(name);
  if (it == m.end()) return -1;
  return it->second;
}

}  // namespace rugscan

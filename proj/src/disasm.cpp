#include "rugscan/disasm.hpp"

namespace rugscan {

u256 Instruction::push_value() const {
  u256 v = 0;
  for (uint8_t b : immediate) {
    v <<= 8;
    v |= b;
  }
  return v;
}

size_t metadata_trailer_len(const Bytes& code) {
  if (code.size() < 4) return 0;
  size_t n = code.size();
  size_t blob_len = (static_cast<size_t>(code[n - 2]) << 8) | code[n - 1];
  // Typical solc trailers are 0x29..0x53 bytes of CBOR; anything outside a
  // generous range is more likely code that happens to end in small bytes.
  if (blob_len < 4 || blob_len > 0x100) return 0;
  if (blob_len + 2 > n) return 0;
  uint8_t head = code[n - 2 - blob_len];
  // CBOR map with 1..4 entries (0xa1..0xa4) opens every solc trailer variant.
  if (head < 0xa1 || head > 0xa4) return 0;
  return blob_len + 2;
}

DisasmResult disassemble(const Bytes& code, bool strip_metadata) {
  DisasmResult out;
  size_t end = code.size();
  if (strip_metadata) {
    size_t trailer = metadata_trailer_len(code);
    out.metadata_len = trailer;
    end -= trailer;
  }
  out.code_len = end;

  size_t pc = 0;
  while (pc < end) {
    Instruction ins;
    ins.offset = static_cast<uint32_t>(pc);
    ins.opcode = code[pc];
    size_t imm = push_width(ins.opcode);
    ++pc;
    if (imm > 0) {
      ins.immediate.reserve(imm);
      for (size_t i = 0; i < imm; ++i) {
        if (pc + i < end) {
          ins.immediate.push_back(code[pc + i]);
        } else {
          ins.immediate.push_back(0);
          out.truncated_push = true;
        }
      }
      pc += imm;
    }
    out.instructions.push_back(std::move(ins));
  }
  return out;
}

Bytes reassemble(const std::vector<Instruction>& instructions) {
  Bytes out;
  for (const auto& ins : instructions) {
    out.push_back(ins.opcode);
    out.insert(out.end(), ins.immediate.begin(), ins.immediate.end());
  }
  return out;
}

}  // namespace rugscan

#include "rugscan/asm.hpp"

namespace rugscan {

Asm& Asm::op(uint8_t opcode) {
  Item it;
  it.kind = Item::Kind::Op;
  it.opcode = opcode;
  items_.push_back(std::move(it));
  return *this;
}

Asm& Asm::op(const std::string& mnemonic) {
  int b = opcode_from_name(mnemonic);
  if (b < 0) throw input_error("unknown mnemonic: " + mnemonic);
  return op(static_cast<uint8_t>(b));
}

Asm& Asm::push(const u256& value, int width) {
  if (width == 0) {
    u256 v = value;
    width = 1;
    while (v > 0xff) {
      v >>= 8;
      ++width;
    }
  }
  if (width < 1 || width > 32) throw input_error("push width out of range");
  Item it;
  it.kind = Item::Kind::Push;
  it.value = value;
  it.width = width;
  items_.push_back(std::move(it));
  return *this;
}

Asm& Asm::push_label(const std::string& name) {
  Item it;
  it.kind = Item::Kind::PushLabel;
  it.name = name;
  items_.push_back(std::move(it));
  return *this;
}

Asm& Asm::label(const std::string& name) {
  Item it;
  it.kind = Item::Kind::Label;
  it.name = name;
  items_.push_back(std::move(it));
  return *this;
}

Asm& Asm::revert_here() {
  push(0).op(op::DUP1).op(op::REVERT);
  return *this;
}

Asm& Asm::calldata_arg(uint32_t byte_offset) {
  push(byte_offset).op(op::CALLDATALOAD);
  return *this;
}

Asm& Asm::mapping_slot(const u256& base_slot) {
  // key is on the stack
  push(0).op(op::MSTORE);
  push(base_slot).push(0x20).op(op::MSTORE);
  push(0x40).push(0).op(op::SHA3);
  return *this;
}

Bytes Asm::assemble() const {
  // Pass 1: lay out offsets. PushLabel is always a PUSH2.
  std::map<std::string, uint32_t> where;
  uint32_t off = 0;
  for (const Item& it : items_) {
    switch (it.kind) {
      case Item::Kind::Op: off += 1; break;
      case Item::Kind::Push: off += 1 + static_cast<uint32_t>(it.width); break;
      case Item::Kind::PushLabel: off += 3; break;
      case Item::Kind::Label:
        if (!where.emplace(it.name, off).second)
          throw input_error("duplicate label: " + it.name);
        off += 1;  // JUMPDEST
        break;
    }
  }

  Bytes out;
  out.reserve(off);
  auto emit_push = [&](const u256& value, int width) {
    out.push_back(static_cast<uint8_t>(op::PUSH1 + width - 1));
    for (int i = width - 1; i >= 0; --i)
      out.push_back(static_cast<uint8_t>((value >> (8 * i)) & 0xff));
  };
  for (const Item& it : items_) {
    switch (it.kind) {
      case Item::Kind::Op:
        out.push_back(it.opcode);
        break;
      case Item::Kind::Push:
        emit_push(it.value, it.width);
        break;
      case Item::Kind::PushLabel: {
        auto f = where.find(it.name);
        if (f == where.end()) throw input_error("undefined label: " + it.name);
        emit_push(f->second, 2);
        break;
      }
      case Item::Kind::Label:
        out.push_back(op::JUMPDEST);
        break;
    }
  }
  return out;
}

}  // namespace rugscan

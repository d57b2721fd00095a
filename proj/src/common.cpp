#include "rugscan/common.hpp"

#include <algorithm>
#include <cctype>

namespace rugscan {

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

Bytes parse_hex(const std::string& hex) {
  size_t start = 0;
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) start = 2;
  size_t n = hex.size() - start;
  if (n % 2 != 0) throw input_error("odd-length hex string");
  Bytes out;
  out.reserve(n / 2);
  for (size_t i = start; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0)
      throw input_error("invalid hex character at position " + std::to_string(i));
    out.push_back(static_cast<uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string to_hex(const Bytes& bytes, bool with_prefix) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2 + 2);
  if (with_prefix) s += "0x";
  for (uint8_t b : bytes) {
    s += digits[b >> 4];
    s += digits[b & 0xf];
  }
  return s;
}

std::string u256_hex(const u256& v) {
  if (v == 0) return "0x0";
  std::string s;
  u256 x = v;
  static const char* digits = "0123456789abcdef";
  while (x != 0) {
    s += digits[static_cast<unsigned>(x & 0xf)];
    x >>= 4;
  }
  std::reverse(s.begin(), s.end());
  return "0x" + s;
}

std::string normalize_address(const std::string& addr) {
  std::string a = addr;
  if (a.size() == 40) a = "0x" + a;
  if (a.size() != 42 || a[0] != '0' || (a[1] != 'x' && a[1] != 'X'))
    throw input_error("malformed address: " + addr);
  std::string out = "0x";
  for (size_t i = 2; i < a.size(); ++i) {
    if (hex_nibble(a[i]) < 0) throw input_error("malformed address: " + addr);
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(a[i])));
  }
  return out;
}

}  // namespace rugscan

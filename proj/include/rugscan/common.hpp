#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace rugscan {

using u256 = boost::multiprecision::uint256_t;
using bigint = boost::multiprecision::cpp_int;
using Bytes = std::vector<uint8_t>;

// Error taxonomy shared by the library, the C API and the CLI. The numeric
// codes double as process exit codes, so keep them stable.
enum class ErrorKind : int {
  Config = 2,
  Input = 3,
  Internal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error internal_error(const std::string& msg) { return Error(ErrorKind::Internal, msg); }

// Hex helpers. parse_hex accepts an optional 0x prefix and rejects odd-length
// or non-hex input (callers decide whether that is a config or input error,
// so this one throws Input by default).
Bytes parse_hex(const std::string& hex);
std::string to_hex(const Bytes& bytes, bool with_prefix = true);

// 256-bit word <-> hex without leading zeros, "0x0" for zero.
std::string u256_hex(const u256& v);

// Lowercases and validates a 0x-prefixed 20-byte address string.
// Throws Input on malformed input.
std::string normalize_address(const std::string& addr);

}  // namespace rugscan

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace multicfv::evm {

enum class OpcodeCategory : std::uint8_t {
  StopArithmetic,
  ComparisonBitwise,
  Keccak,
  Environmental,
  BlockInformation,
  StackMemoryStorageFlow,
  Push,
  Duplication,
  Exchange,
  Logging,
  System,
};

inline constexpr std::size_t kCategoryCount = 11;

std::string_view category_name(OpcodeCategory category);

struct Opcode {
  std::uint8_t byte_value = 0;
  std::string_view mnemonic;
  OpcodeCategory category = OpcodeCategory::System;
  std::uint8_t immediate_len = 0;
  bool is_terminator = false;
  bool is_conditional_branch = false;
  bool is_call = false;
  // False for bytes missing from the instruction table; those decode as
  // INVALID-class pseudo-instructions.
  bool defined = false;

  bool is_push() const { return immediate_len > 0; }
  bool is_jump() const { return byte_value == 0x56; }
  bool is_jumpdest() const { return byte_value == 0x5B; }
  bool ends_block() const { return is_terminator || is_conditional_branch; }
};

/// Table lookup; never fails. Undefined bytes yield an INVALID-class entry.
const Opcode& opcode_info(std::uint8_t byte_value);

/// All 256 entries indexed by byte value.
std::span<const Opcode, 256> opcode_table();

/// Lookup by mnemonic over the defined set; nullptr when unknown.
const Opcode* find_opcode(std::string_view mnemonic);

struct Instruction {
  std::size_t offset = 0;
  const Opcode* opcode = nullptr;
  std::vector<std::uint8_t> immediate;  // always opcode->immediate_len bytes
  bool truncated = false;               // immediate ran past end of code

  std::size_t size() const { return 1 + immediate.size(); }
  std::size_t next_offset() const { return offset + size(); }
};

struct Disassembly {
  std::vector<Instruction> instructions;
  std::vector<std::string> warnings;
  std::size_t code_size = 0;
};

/// Parses hex text (optional 0x prefix, whitespace ignored) into raw bytes.
/// Throws Error(NonHexInput) on odd digit count or a non-hex character.
std::vector<std::uint8_t> parse_hex(std::string_view hex_text);

Disassembly decode(std::span<const std::uint8_t> code);
Disassembly decode_bytecode(std::string_view hex_text);

/// Re-encodes instructions; truncated PUSH immediates come back zero-padded.
std::vector<std::uint8_t> encode(std::span<const Instruction> instructions);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// `OFFSET MNEMONIC [IMMEDIATE_HEX]`, offset as 0x-prefixed 4+ hex digits.
std::string format_instruction(const Instruction& instruction);

}  // namespace multicfv::evm

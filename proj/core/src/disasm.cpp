#include "multicfv/disasm.hpp"

#include <cstdio>
#include <unordered_map>

#include "multicfv/error.hpp"

namespace multicfv::evm {
namespace {

struct Entry {
  std::uint8_t byte;
  const char* mnemonic;
  OpcodeCategory category;
};

using C = OpcodeCategory;

// Fixed entries; PUSHn/DUPn/SWAPn are generated below.
constexpr Entry kEntries[] = {
    {0x00, "STOP", C::StopArithmetic},
    {0x01, "ADD", C::StopArithmetic},
    {0x02, "MUL", C::StopArithmetic},
    {0x03, "SUB", C::StopArithmetic},
    {0x04, "DIV", C::StopArithmetic},
    {0x05, "SDIV", C::StopArithmetic},
    {0x06, "MOD", C::StopArithmetic},
    {0x07, "SMOD", C::StopArithmetic},
    {0x08, "ADDMOD", C::StopArithmetic},
    {0x09, "MULMOD", C::StopArithmetic},
    {0x0A, "EXP", C::StopArithmetic},
    {0x0B, "SIGNEXTEND", C::StopArithmetic},

    {0x10, "LT", C::ComparisonBitwise},
    {0x11, "GT", C::ComparisonBitwise},
    {0x12, "SLT", C::ComparisonBitwise},
    {0x13, "SGT", C::ComparisonBitwise},
    {0x14, "EQ", C::ComparisonBitwise},
    {0x15, "ISZERO", C::ComparisonBitwise},
    {0x16, "AND", C::ComparisonBitwise},
    {0x17, "OR", C::ComparisonBitwise},
    {0x18, "XOR", C::ComparisonBitwise},
    {0x19, "NOT", C::ComparisonBitwise},
    {0x1A, "BYTE", C::ComparisonBitwise},
    {0x1B, "SHL", C::ComparisonBitwise},
    {0x1C, "SHR", C::ComparisonBitwise},
    {0x1D, "SAR", C::ComparisonBitwise},

    {0x20, "KECCAK256", C::Keccak},

    {0x30, "ADDRESS", C::Environmental},
    {0x31, "BALANCE", C::Environmental},
    {0x32, "ORIGIN", C::Environmental},
    {0x33, "CALLER", C::Environmental},
    {0x34, "CALLVALUE", C::Environmental},
    {0x35, "CALLDATALOAD", C::Environmental},
    {0x36, "CALLDATASIZE", C::Environmental},
    {0x37, "CALLDATACOPY", C::Environmental},
    {0x38, "CODESIZE", C::Environmental},
    {0x39, "CODECOPY", C::Environmental},
    {0x3A, "GASPRICE", C::Environmental},
    {0x3B, "EXTCODESIZE", C::Environmental},
    {0x3C, "EXTCODECOPY", C::Environmental},
    {0x3D, "RETURNDATASIZE", C::Environmental},
    {0x3E, "RETURNDATACOPY", C::Environmental},

    {0x40, "BLOCKHASH", C::BlockInformation},
    {0x41, "COINBASE", C::BlockInformation},
    {0x42, "TIMESTAMP", C::BlockInformation},
    {0x43, "NUMBER", C::BlockInformation},
    {0x44, "DIFFICULTY", C::BlockInformation},
    {0x45, "GASLIMIT", C::BlockInformation},
    {0x46, "CHAINID", C::BlockInformation},

    {0x50, "POP", C::StackMemoryStorageFlow},
    {0x51, "MLOAD", C::StackMemoryStorageFlow},
    {0x52, "MSTORE", C::StackMemoryStorageFlow},
    {0x53, "MSTORE8", C::StackMemoryStorageFlow},
    {0x54, "SLOAD", C::StackMemoryStorageFlow},
    {0x55, "SSTORE", C::StackMemoryStorageFlow},
    {0x56, "JUMP", C::StackMemoryStorageFlow},
    {0x57, "JUMPI", C::StackMemoryStorageFlow},
    {0x58, "PC", C::StackMemoryStorageFlow},
    {0x59, "MSIZE", C::StackMemoryStorageFlow},
    {0x5A, "GAS", C::StackMemoryStorageFlow},
    {0x5B, "JUMPDEST", C::StackMemoryStorageFlow},

    {0xA0, "LOG0", C::Logging},
    {0xA1, "LOG1", C::Logging},
    {0xA2, "LOG2", C::Logging},
    {0xA3, "LOG3", C::Logging},
    {0xA4, "LOG4", C::Logging},

    {0xF0, "CREATE", C::System},
    {0xF1, "CALL", C::System},
    {0xF2, "CALLCODE", C::System},
    {0xF3, "RETURN", C::System},
    {0xF4, "DELEGATECALL", C::System},
    {0xF5, "CREATE2", C::System},
    {0xFA, "STATICCALL", C::System},
    {0xFD, "REVERT", C::System},
    {0xFE, "INVALID", C::System},
    {0xFF, "SELFDESTRUCT", C::System},
};

struct Table {
  std::array<std::string, 256> names;
  std::array<Opcode, 256> ops;
  std::unordered_map<std::string_view, const Opcode*> by_name;

  Table() {
    auto define = [&](std::uint8_t b, std::string name, C category) {
      names[b] = std::move(name);
      Opcode& op = ops[b];
      op.byte_value = b;
      op.category = category;
      op.defined = true;
    };
    for (const Entry& e : kEntries) define(e.byte, e.mnemonic, e.category);
    for (int n = 1; n <= 32; ++n) define(static_cast<std::uint8_t>(0x5F + n), "PUSH" + std::to_string(n), C::Push);
    for (int n = 1; n <= 16; ++n) {
      define(static_cast<std::uint8_t>(0x7F + n), "DUP" + std::to_string(n), C::Duplication);
      define(static_cast<std::uint8_t>(0x8F + n), "SWAP" + std::to_string(n), C::Exchange);
    }

    for (int b = 0; b < 256; ++b) {
      Opcode& op = ops[b];
      op.byte_value = static_cast<std::uint8_t>(b);
      if (!op.defined) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "INVALID_%02X", b);
        names[b] = buf;
        op.category = C::System;
        op.is_terminator = true;
        continue;
      }
      if (b >= 0x60 && b <= 0x7F) op.immediate_len = static_cast<std::uint8_t>(b - 0x5F);
      switch (b) {
        case 0x00: case 0x56: case 0xF3: case 0xFD: case 0xFE: case 0xFF:
          op.is_terminator = true;
          break;
        case 0x57:
          op.is_conditional_branch = true;
          break;
        case 0xF0: case 0xF1: case 0xF2: case 0xF4: case 0xF5: case 0xFA:
          op.is_call = true;
          break;
        default:
          break;
      }
    }
    for (int b = 0; b < 256; ++b) {
      ops[b].mnemonic = names[b];
      if (ops[b].defined) by_name.emplace(ops[b].mnemonic, &ops[b]);
    }
  }
};

const Table& table() {
  static const Table t;
  return t;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\v'; }

}  // namespace

std::string_view category_name(OpcodeCategory category) {
  switch (category) {
    case C::StopArithmetic: return "Stop and Arithmetic Operations";
    case C::ComparisonBitwise: return "Comparison and Bitwise Logic Operations";
    case C::Keccak: return "KECCAK256 Method";
    case C::Environmental: return "Environmental Information";
    case C::BlockInformation: return "Block Information";
    case C::StackMemoryStorageFlow: return "Stack, Memory, Storage and Flow Operations";
    case C::Push: return "Push Operations";
    case C::Duplication: return "Duplication Operations";
    case C::Exchange: return "Exchange Operations";
    case C::Logging: return "Logging Operations";
    case C::System: return "System Operations";
  }
  return "?";
}

const Opcode& opcode_info(std::uint8_t byte_value) { return table().ops[byte_value]; }

std::span<const Opcode, 256> opcode_table() { return std::span<const Opcode, 256>(table().ops); }

const Opcode* find_opcode(std::string_view mnemonic) {
  const auto& m = table().by_name;
  auto it = m.find(mnemonic);
  return it == m.end() ? nullptr : it->second;
}

std::vector<std::uint8_t> parse_hex(std::string_view hex_text) {
  std::size_t begin = 0;
  while (begin < hex_text.size() && is_space(hex_text[begin])) ++begin;
  if (hex_text.size() - begin >= 2 && hex_text[begin] == '0' && (hex_text[begin + 1] == 'x' || hex_text[begin + 1] == 'X'))
    begin += 2;

  std::vector<std::uint8_t> bytes;
  bytes.reserve((hex_text.size() - begin) / 2);
  int pending = -1;
  for (std::size_t i = begin; i < hex_text.size(); ++i) {
    const char c = hex_text[i];
    if (is_space(c)) continue;
    const int v = hex_value(c);
    if (v < 0) throw Error(ErrorKind::NonHexInput, "non-hex character at position " + std::to_string(i));
    if (pending < 0) {
      pending = v;
    } else {
      bytes.push_back(static_cast<std::uint8_t>(pending << 4 | v));
      pending = -1;
    }
  }
  if (pending >= 0) throw Error(ErrorKind::NonHexInput, "odd number of hex digits");
  return bytes;
}

Disassembly decode(std::span<const std::uint8_t> code) {
  Disassembly out;
  out.code_size = code.size();
  if (code.empty()) {
    out.warnings.emplace_back("empty bytecode");
    return out;
  }
  std::size_t pc = 0;
  while (pc < code.size()) {
    Instruction ins;
    ins.offset = pc;
    ins.opcode = &opcode_info(code[pc]);
    const std::size_t n = ins.opcode->immediate_len;
    ins.immediate.assign(n, 0);
    const std::size_t available = std::min(n, code.size() - pc - 1);
    for (std::size_t k = 0; k < available; ++k) ins.immediate[k] = code[pc + 1 + k];
    if (available < n) {
      ins.truncated = true;
      out.warnings.push_back("truncated " + std::string(ins.opcode->mnemonic) + " at offset " + std::to_string(pc));
    }
    pc += 1 + n;
    out.instructions.push_back(std::move(ins));
  }
  return out;
}

Disassembly decode_bytecode(std::string_view hex_text) {
  const auto bytes = parse_hex(hex_text);
  return decode(bytes);
}

std::vector<std::uint8_t> encode(std::span<const Instruction> instructions) {
  std::vector<std::uint8_t> out;
  for (const Instruction& ins : instructions) {
    out.push_back(ins.opcode->byte_value);
    out.insert(out.end(), ins.immediate.begin(), ins.immediate.end());
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

std::string format_instruction(const Instruction& instruction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%04zx", instruction.offset);
  std::string line = buf;
  line += ' ';
  line += instruction.opcode->mnemonic;
  if (!instruction.immediate.empty()) {
    line += " 0x";
    line += to_hex(instruction.immediate);
  }
  return line;
}

}  // namespace multicfv::evm

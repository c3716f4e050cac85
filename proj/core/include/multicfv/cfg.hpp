#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multicfv/disasm.hpp"

namespace multicfv::cfg {

enum class EdgeKind : std::uint8_t {
  Unconditional,     // blue
  ConditionalTrue,   // green
  ConditionalFalse,  // red
  Call,              // yellow
};

std::string_view edge_kind_name(EdgeKind kind);
std::string_view edge_color(EdgeKind kind);

struct BasicBlock {
  std::size_t id = 0;
  std::size_t start_offset = 0;
  std::size_t end_offset = 0;  // one past the last byte of the block
  std::vector<evm::Instruction> instructions;
  bool is_jumpdest_entry = false;
  // Empty block standing for the implicit STOP past the end of code; only
  // created as the fall-through target of a trailing JUMPI.
  bool is_implicit_exit = false;

  const evm::Instruction* last() const { return instructions.empty() ? nullptr : &instructions.back(); }
};

struct Edge {
  std::size_t source = 0;
  EdgeKind kind = EdgeKind::Unconditional;
  std::size_t target = 0;

  auto operator<=>(const Edge&) const = default;
};

struct Diagnostic {
  enum class Kind { UnresolvedJump, TargetNotJumpdest };
  Kind kind;
  std::size_t offset;  // offset of the JUMP/JUMPI
  std::size_t target;  // constant target, when known

  std::string to_string() const;
};

struct ControlFlowGraph {
  std::string contract_name;
  std::vector<BasicBlock> blocks;  // ordered by start_offset; id == index
  std::vector<Edge> edges;         // sorted, unique
  std::vector<Diagnostic> diagnostics;

  std::size_t instruction_count() const;
  /// Block id whose range contains offset, or npos.
  std::size_t block_at(std::size_t offset) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

std::vector<BasicBlock> segment_blocks(std::span<const evm::Instruction> instructions);

ControlFlowGraph resolve_edges(std::vector<BasicBlock> blocks, std::string contract_name = "contract.sol");

/// decode → segment → resolve in one step.
ControlFlowGraph build_cfg(std::string_view hex_bytecode, std::string contract_name);

std::string emit_dot(const ControlFlowGraph& cfg);

/// Appends ".sol" unless already present.
std::string normalize_contract_name(std::string_view name);

}  // namespace multicfv::cfg

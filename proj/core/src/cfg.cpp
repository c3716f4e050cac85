#include "multicfv/cfg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace multicfv::cfg {
namespace {

constexpr std::size_t kTooLarge = std::numeric_limits<std::size_t>::max();

std::size_t immediate_value(const evm::Instruction& push) {
  std::size_t value = 0;
  for (std::uint8_t b : push.immediate) {
    if (value > (kTooLarge >> 8)) return kTooLarge;
    value = value << 8 | b;
  }
  return value;
}

std::string escape_dot(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Unconditional: return "unconditional";
    case EdgeKind::ConditionalTrue: return "true";
    case EdgeKind::ConditionalFalse: return "false";
    case EdgeKind::Call: return "call";
  }
  return "?";
}

std::string_view edge_color(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Unconditional: return "blue";
    case EdgeKind::ConditionalTrue: return "green";
    case EdgeKind::ConditionalFalse: return "red";
    case EdgeKind::Call: return "yellow";
  }
  return "black";
}

std::string Diagnostic::to_string() const {
  std::string s = kind == Kind::UnresolvedJump ? "WARN unresolved-jump offset=" : "WARN target-not-jumpdest offset=";
  s += std::to_string(offset);
  if (kind == Kind::TargetNotJumpdest) {
    s += " target=";
    s += target == kTooLarge ? std::string("overflow") : std::to_string(target);
  }
  return s;
}

std::size_t ControlFlowGraph::instruction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.instructions.size();
  return n;
}

std::size_t ControlFlowGraph::block_at(std::size_t offset) const {
  auto it = std::upper_bound(blocks.begin(), blocks.end(), offset,
                             [](std::size_t off, const BasicBlock& b) { return off < b.start_offset; });
  if (it == blocks.begin()) return npos;
  --it;
  if (offset < it->end_offset) return it->id;
  return npos;
}

std::vector<BasicBlock> segment_blocks(std::span<const evm::Instruction> instructions) {
  std::vector<BasicBlock> blocks;
  BasicBlock current;
  auto flush = [&] {
    if (current.instructions.empty()) return;
    current.id = blocks.size();
    current.start_offset = current.instructions.front().offset;
    current.end_offset = current.instructions.back().next_offset();
    current.is_jumpdest_entry = current.instructions.front().opcode->is_jumpdest();
    blocks.push_back(std::move(current));
    current = BasicBlock{};
  };
  for (const auto& ins : instructions) {
    if (ins.opcode->is_jumpdest()) flush();
    current.instructions.push_back(ins);
    if (ins.opcode->ends_block()) flush();
  }
  flush();
  return blocks;
}

ControlFlowGraph resolve_edges(std::vector<BasicBlock> blocks, std::string contract_name) {
  ControlFlowGraph g;
  g.contract_name = std::move(contract_name);
  g.blocks = std::move(blocks);

  std::map<std::size_t, std::size_t> jumpdest_block;
  for (const auto& b : g.blocks)
    if (b.is_jumpdest_entry) jumpdest_block.emplace(b.start_offset, b.id);

  std::vector<Edge> edges;
  const std::size_t original_count = g.blocks.size();
  auto resolve_target = [&](const BasicBlock& b) -> std::size_t {
    const auto& last = b.instructions.back();
    if (b.instructions.size() < 2 || !b.instructions[b.instructions.size() - 2].opcode->is_push()) {
      g.diagnostics.push_back({Diagnostic::Kind::UnresolvedJump, last.offset, 0});
      return ControlFlowGraph::npos;
    }
    const std::size_t target = immediate_value(b.instructions[b.instructions.size() - 2]);
    auto it = jumpdest_block.find(target);
    if (it == jumpdest_block.end()) {
      g.diagnostics.push_back({Diagnostic::Kind::TargetNotJumpdest, last.offset, target});
      return ControlFlowGraph::npos;
    }
    return it->second;
  };

  for (std::size_t i = 0; i < original_count; ++i) {
    const BasicBlock& b = g.blocks[i];
    const evm::Instruction& last = b.instructions.back();
    const bool has_next = i + 1 < g.blocks.size();

    for (const auto& ins : b.instructions) {
      if (!ins.opcode->is_call) continue;
      std::size_t cont = g.block_at(ins.next_offset());
      if (cont == ControlFlowGraph::npos) cont = b.id;
      edges.push_back({b.id, EdgeKind::Call, cont});
    }

    if (last.opcode->is_jump()) {
      const std::size_t t = resolve_target(b);
      if (t != ControlFlowGraph::npos) edges.push_back({b.id, EdgeKind::Unconditional, t});
    } else if (last.opcode->is_conditional_branch) {
      const std::size_t t = resolve_target(b);
      if (t != ControlFlowGraph::npos) edges.push_back({b.id, EdgeKind::ConditionalTrue, t});
      std::size_t fall = i + 1;
      if (!has_next) {
        BasicBlock exit;
        exit.id = g.blocks.size();
        exit.start_offset = exit.end_offset = b.end_offset;
        exit.is_implicit_exit = true;
        g.blocks.push_back(std::move(exit));
        fall = g.blocks.size() - 1;
      }
      edges.push_back({g.blocks[i].id, EdgeKind::ConditionalFalse, fall});
    } else if (!last.opcode->is_terminator && has_next) {
      edges.push_back({b.id, EdgeKind::Unconditional, i + 1});
    }
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

ControlFlowGraph build_cfg(std::string_view hex_bytecode, std::string contract_name) {
  const auto dis = evm::decode_bytecode(hex_bytecode);
  return resolve_edges(segment_blocks(dis.instructions), normalize_contract_name(contract_name));
}

std::string emit_dot(const ControlFlowGraph& cfg) {
  std::ostringstream os;
  os << "digraph \"" << escape_dot(cfg.contract_name) << "\" {\n";
  os << "  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& b : cfg.blocks) {
    char range[64];
    std::snprintf(range, sizeof range, "block %zu [0x%04zx, 0x%04zx)", b.id, b.start_offset, b.end_offset);
    std::string label = range;
    if (b.is_implicit_exit) label += "\\l(implicit stop)";
    for (const auto& ins : b.instructions) {
      label += "\\l";
      label += escape_dot(evm::format_instruction(ins));
    }
    label += "\\l";
    os << "  b" << b.id << " [label=\"" << label << "\"];\n";
  }
  for (const auto& e : cfg.edges) {
    os << "  b" << e.source << " -> b" << e.target << " [color=" << edge_color(e.kind) << ", label=\""
       << edge_kind_name(e.kind) << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

std::string normalize_contract_name(std::string_view name) {
  std::string s(name);
  if (s.size() < 4 || s.compare(s.size() - 4, 4, ".sol") != 0) s += ".sol";
  return s;
}

}  // namespace multicfv::cfg

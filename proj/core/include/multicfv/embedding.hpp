#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "multicfv/autodiff.hpp"
#include "multicfv/cfg.hpp"

namespace multicfv::embed {

/// Fixed-dimension feature hashing shared by block and comment-token
/// embeddings. Buckets come from 64-bit FNV-1a of the feature text.
class HashingEmbedder {
 public:
  explicit HashingEmbedder(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t bucket(std::string_view feature) const;
  void add(Vector& acc, std::string_view feature, double weight = 1.0) const;

  /// Token unigram plus boundary-marked character trigrams, L2-normalized.
  Vector embed_token(std::string_view token) const;

 private:
  std::size_t dim_;
};

/// Block embedder: an 11-bin opcode-category histogram projected through a
/// seeded random matrix, plus hashed mnemonic-bigram counts, L2-normalized.
class BlockEmbedder {
 public:
  BlockEmbedder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const { return hashing_.dim(); }
  std::uint64_t seed() const { return seed_; }
  const Matrix& projection() const { return projection_; }  // 11 x dim

  Vector embed(const cfg::BasicBlock& block) const;
  Vector embed(std::span<const evm::Instruction> instructions) const;

 private:
  HashingEmbedder hashing_;
  std::uint64_t seed_;
  Matrix projection_;
};

/// Node feature matrix: one row per block, in block-id order.
Matrix node_features(const cfg::ControlFlowGraph& cfg, const BlockEmbedder& embedder);

/// The (graph, node features, contract name) bundle fed to the graph encoder.
struct ControlFlowRecord {
  cfg::ControlFlowGraph graph;
  Matrix node_features;

  const std::string& contract_name() const { return graph.contract_name; }
};

/// Throws Error(DimensionMismatch) when row count differs from block count.
ControlFlowRecord assemble_ocfg(cfg::ControlFlowGraph graph, Matrix node_features);

}  // namespace multicfv::embed

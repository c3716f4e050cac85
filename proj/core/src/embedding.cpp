#include "multicfv/embedding.hpp"

#include "multicfv/error.hpp"
#include "multicfv/random.hpp"

namespace multicfv::embed {

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim < 16) throw Error(ErrorKind::InvalidArgument, "embedding dim must be >= 16, got " + std::to_string(dim));
}

std::size_t HashingEmbedder::bucket(std::string_view feature) const { return fnv1a(feature) % dim_; }

void HashingEmbedder::add(Vector& acc, std::string_view feature, double weight) const {
  acc[static_cast<Eigen::Index>(bucket(feature))] += weight;
}

Vector HashingEmbedder::embed_token(std::string_view token) const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
  if (token.empty()) return v;
  add(v, std::string("w:") + std::string(token));
  const std::string marked = "<" + std::string(token) + ">";
  for (std::size_t i = 0; i + 3 <= marked.size(); ++i) add(v, "c:" + marked.substr(i, 3));
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

BlockEmbedder::BlockEmbedder(std::size_t dim, std::uint64_t seed)
    : hashing_(dim), seed_(seed), projection_(evm::kCategoryCount, static_cast<Eigen::Index>(dim)) {
  Rng rng(seed);
  for (Eigen::Index r = 0; r < projection_.rows(); ++r)
    for (Eigen::Index c = 0; c < projection_.cols(); ++c) projection_(r, c) = rng.uniform(-1.0, 1.0);
}

Vector BlockEmbedder::embed(const cfg::BasicBlock& block) const { return embed(block.instructions); }

Vector BlockEmbedder::embed(std::span<const evm::Instruction> instructions) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim()));
  if (instructions.empty()) return out;

  Eigen::RowVectorXd histogram = Eigen::RowVectorXd::Zero(evm::kCategoryCount);
  for (const auto& ins : instructions) histogram[static_cast<Eigen::Index>(ins.opcode->category)] += 1.0;
  out = (histogram * projection_).transpose();

  std::string pair;
  for (std::size_t i = 0; i + 1 < instructions.size(); ++i) {
    pair.assign(instructions[i].opcode->mnemonic);
    pair += ' ';
    pair += instructions[i + 1].opcode->mnemonic;
    hashing_.add(out, pair);
  }
  const double n = out.norm();
  if (n > 0) out /= n;
  return out;
}

Matrix node_features(const cfg::ControlFlowGraph& cfg, const BlockEmbedder& embedder) {
  Matrix nf(static_cast<Eigen::Index>(cfg.blocks.size()), static_cast<Eigen::Index>(embedder.dim()));
  for (const auto& b : cfg.blocks) nf.row(static_cast<Eigen::Index>(b.id)) = embedder.embed(b).transpose();
  return nf;
}

ControlFlowRecord assemble_ocfg(cfg::ControlFlowGraph graph, Matrix node_features) {
  if (static_cast<std::size_t>(node_features.rows()) != graph.blocks.size())
    throw Error(ErrorKind::DimensionMismatch, "node feature rows (" + std::to_string(node_features.rows()) +
                                                  ") != block count (" + std::to_string(graph.blocks.size()) + ")");
  return ControlFlowRecord{std::move(graph), std::move(node_features)};
}

}  // namespace multicfv::embed

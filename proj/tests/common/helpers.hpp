#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "multicfv/cfg.hpp"
#include "multicfv/embedding.hpp"
#include "multicfv/fusion.hpp"
#include "multicfv/pipeline.hpp"
#include "multicfv/random.hpp"
#include "multicfv/trainer.hpp"

#ifndef MULTICFV_FIXTURE_DIR
#error "MULTICFV_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace testing_support {

namespace fs = std::filesystem;
using multicfv::Matrix;
using multicfv::Rng;
using multicfv::Vector;

inline fs::path fixture_dir() { return fs::path(MULTICFV_FIXTURE_DIR); }
inline fs::path corpus_dir() { return fixture_dir() / "corpus"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mcfv") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

inline multicfv::fusion::ContractFeatures random_features(const std::string& name, Eigen::Index d, Rng& rng) {
  return multicfv::fusion::fuse(name, random_vector(d, rng, 0, 1), random_vector(d, rng, 0, 1), random_vector(d, rng, 0, 1), d);
}

// Random graph over n nodes with random typed edges, node features in [-1, 1).
inline multicfv::embed::ControlFlowRecord random_record(Rng& rng, std::size_t n, Eigen::Index dim) {
  multicfv::cfg::ControlFlowGraph g;
  g.contract_name = "rand.sol";
  for (std::size_t i = 0; i < n; ++i) {
    multicfv::cfg::BasicBlock b;
    b.id = i;
    b.start_offset = i * 4;
    b.end_offset = i * 4 + 4;
    g.blocks.push_back(b);
  }
  const std::size_t m = rng.below(2 * n + 1);
  for (std::size_t e = 0; e < m; ++e)
    g.edges.push_back({rng.below(n), static_cast<multicfv::cfg::EdgeKind>(rng.below(4)), rng.below(n)});
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return multicfv::embed::assemble_ocfg(std::move(g), random_matrix(static_cast<Eigen::Index>(n), dim, rng));
}

/// Two Gaussian clouds at +-margin along a random unit direction, about 30% positives.
inline std::vector<multicfv::train::Example> separable_dataset(std::size_t n, Eigen::Index dim, std::uint64_t seed,
                                                               double margin = 1.0, double noise = 0.3) {
  Rng rng(seed);
  Vector u(dim);
  for (Eigen::Index i = 0; i < dim; ++i) u(i) = rng.normal();
  u.normalize();
  std::vector<multicfv::train::Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 10 < 3 ? 1 : 0;
    Vector x(dim);
    for (Eigen::Index c = 0; c < dim; ++c) x(c) = noise * rng.normal();
    // Pin the component along u to +-margin; the noise stays orthogonal.
    x += ((label ? margin : -margin) - x.dot(u)) * u;
    out.push_back({"s" + std::to_string(i), x, label});
  }
  return out;
}

/// Tiny pipeline dimensions for fast gradient checks and oracle comparisons.
inline multicfv::pipeline::PipelineSettings tiny_settings() {
  multicfv::pipeline::PipelineSettings s;
  s.node_dim = 16;
  s.modality_dim = 6;
  s.graph_hidden = 5;
  s.graph_fc = 4;
  s.gru_layers = 3;
  s.comment_embed = 16;
  s.comment_hidden = 5;
  s.comment_layers = 2;
  s.model_seed = 11;
  return s;
}

}  // namespace testing_support

#pragma once

#include <string>
#include <vector>

#include "multicfv/autodiff.hpp"

namespace multicfv {

namespace store {
class FeatureStore;
}

namespace fusion {

inline constexpr Eigen::Index kModalityDim = 512;
inline constexpr Eigen::Index kModalityCount = 3;

struct ContractFeatures {
  std::string contract_name;
  Matrix F;  // rows: cfg, ast, com
  bool no_comments = false;

  Eigen::Index dim() const { return F.cols(); }
  Vector cfg() const { return F.row(0).transpose(); }
  Vector ast() const { return F.row(1).transpose(); }
  Vector com() const { return F.row(2).transpose(); }
  /// Row-major flattening of F: cfg | ast | com.
  Vector flattened() const;
};

/// Stacks the three modality vectors; throws Error(DimensionMismatch) unless
/// all three share the expected length.
ContractFeatures fuse(std::string contract_name, const Vector& f_cfg, const Vector& f_ast, const Vector& f_com,
                      Eigen::Index expected_dim = kModalityDim);

struct SimilarityScore {
  double value = 0.0;
  double cosine = 0.0;
  double rbf = 0.0;
};

/// 1 / (flattened dimension), the default RBF width.
double default_gamma(Eigen::Index modality_dim = kModalityDim);

SimilarityScore similarity(const ContractFeatures& a, const ContractFeatures& b, double gamma);

struct CloneMatch {
  std::string contract_name;
  SimilarityScore score;
};

/// Every store entry scoring >= threshold, best first, ties by name.
std::vector<CloneMatch> rank_clones(const ContractFeatures& query, const std::vector<ContractFeatures>& candidates,
                                    double threshold, double gamma);
std::vector<CloneMatch> rank_clones(const ContractFeatures& query, const store::FeatureStore& store, double threshold,
                                    double gamma);

}  // namespace fusion
}  // namespace multicfv

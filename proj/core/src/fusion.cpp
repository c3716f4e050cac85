#include "multicfv/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "multicfv/error.hpp"
#include "multicfv/feature_store.hpp"

namespace multicfv::fusion {

Vector ContractFeatures::flattened() const {
  Vector v(F.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < F.rows(); ++r)
    for (Eigen::Index c = 0; c < F.cols(); ++c) v[k++] = F(r, c);
  return v;
}

ContractFeatures fuse(std::string contract_name, const Vector& f_cfg, const Vector& f_ast, const Vector& f_com,
                      Eigen::Index expected_dim) {
  if (f_cfg.size() != expected_dim || f_ast.size() != expected_dim || f_com.size() != expected_dim)
    throw Error(ErrorKind::DimensionMismatch, "modality vectors must all have length " + std::to_string(expected_dim));
  ContractFeatures out;
  out.contract_name = std::move(contract_name);
  out.F.resize(kModalityCount, expected_dim);
  out.F.row(0) = f_cfg.transpose();
  out.F.row(1) = f_ast.transpose();
  out.F.row(2) = f_com.transpose();
  return out;
}

double default_gamma(Eigen::Index modality_dim) { return 1.0 / static_cast<double>(kModalityCount * modality_dim); }

SimilarityScore similarity(const ContractFeatures& a, const ContractFeatures& b, double gamma) {
  if (a.F.rows() != b.F.rows() || a.F.cols() != b.F.cols())
    throw Error(ErrorKind::DimensionMismatch, "feature matrices differ in shape");
  if (!(gamma > 0)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");

  // Plain ordered loops: every term is symmetric in (a, b), so the result is
  // bit-identical under argument swap.
  double dot = 0.0, na = 0.0, nb = 0.0, dist2 = 0.0;
  for (Eigen::Index r = 0; r < a.F.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.F.cols(); ++c) {
      const double x = a.F(r, c);
      const double y = b.F(r, c);
      dot += x * y;
      na += x * x;
      nb += y * y;
      const double d = x - y;
      dist2 += d * d;
    }
  }
  SimilarityScore s;
  const double denom = std::sqrt(na * nb);
  s.cosine = denom > 0.0 ? std::clamp(dot / denom, -1.0, 1.0) : 0.0;
  s.rbf = std::exp(-gamma * dist2);
  s.value = s.cosine * s.rbf;
  return s;
}

std::vector<CloneMatch> rank_clones(const ContractFeatures& query, const std::vector<ContractFeatures>& candidates,
                                    double threshold, double gamma) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must lie in (0, 1]");
  std::vector<CloneMatch> out;
  for (const auto& c : candidates) {
    const SimilarityScore s = similarity(query, c, gamma);
    if (s.value >= threshold) out.push_back({c.contract_name, s});
  }
  std::sort(out.begin(), out.end(), [](const CloneMatch& x, const CloneMatch& y) {
    if (x.score.value != y.score.value) return x.score.value > y.score.value;
    return x.contract_name < y.contract_name;
  });
  return out;
}

std::vector<CloneMatch> rank_clones(const ContractFeatures& query, const store::FeatureStore& store, double threshold,
                                    double gamma) {
  std::vector<ContractFeatures> candidates;
  for (const auto& rec : store.scan()) candidates.push_back(rec.features);
  return rank_clones(query, candidates, threshold, gamma);
}

}  // namespace multicfv::fusion

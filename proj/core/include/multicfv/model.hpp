#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "multicfv/ast.hpp"
#include "multicfv/comments.hpp"
#include "multicfv/graph_encoder.hpp"

namespace multicfv::model {

/// Concatenated modality features -> FC + ReLU -> affine -> sigmoid.
struct ClassifierHead {
  Matrix fc_weight;   // input_dim x hidden_dim
  Matrix fc_bias;     // 1 x hidden_dim
  Matrix out_weight;  // hidden_dim x 1
  Matrix out_bias;    // 1 x 1

  static ClassifierHead init(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed);
  Eigen::Index input_dim() const { return fc_weight.rows(); }

  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    f("head.fc_weight", self.fc_weight);
    f("head.fc_bias", self.fc_bias);
    f("head.out_weight", self.out_weight);
    f("head.out_bias", self.out_bias);
  }
};

/// features: B x input_dim rows. Returns B x 1 probabilities.
ad::Var classify(ad::Binder& bind, ad::Var features, const ClassifierHead& head, const encoder::Dropout& dropout);
double classify(const Vector& flattened_features, const ClassifierHead& head);

/// The three modality extractors' trainable weights.
struct FeatureModel {
  encoder::EncoderParams graph;
  ast::AstProjection ast;
  comments::CommentParams comments;

  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    self.graph.visit(f);
    self.ast.visit(f);
    self.comments.visit(f);
  }
};

using Metadata = std::map<std::string, std::string>;

/// Flat little-endian float64 tensor file with a dimension header, plus a
/// `<path>.manifest` text sidecar naming every tensor and its shape.
void save_tensors(const std::filesystem::path& path, const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                  const Metadata& meta);

struct TensorFile {
  Metadata meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* find(const std::string& name) const;
};

TensorFile load_tensors(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path);

/// Collects (name, tensor) pairs from anything with a visit() member.
template <class T>
std::vector<std::pair<std::string, const Matrix*>> named_tensors(const T& params) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  params.visit([&](const std::string& name, const Matrix& m) { out.emplace_back(name, &m); });
  return out;
}

/// Copies every tensor visited in params from file; missing names or shape
/// changes throw Error(CorruptFile).
template <class T>
void assign_tensors(T& params, const TensorFile& file);

}  // namespace multicfv::model

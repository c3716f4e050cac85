#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multicfv/autodiff.hpp"
#include "multicfv/embedding.hpp"

namespace multicfv::comments {

class StopwordList {
 public:
  /// The list shipped in data/stopwords_v1.txt, compiled in.
  static const StopwordList& builtin();
  static StopwordList load(const std::filesystem::path& path);
  static StopwordList parse(std::string_view text);

  bool contains(std::string_view word) const { return words_.find(std::string(word)) != words_.end(); }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

struct CommentSpan {
  std::size_t start = 0;  // offset of the opening marker
  std::size_t end = 0;    // one past the closing marker (line comments stop before the newline)
  auto operator<=>(const CommentSpan&) const = default;
};

struct CommentCorpus {
  std::string contract_name;
  std::vector<std::string> tokens;
  std::vector<CommentSpan> raw_comment_spans;

  bool empty() const { return tokens.empty(); }
};

/// Finds `//`, `///`, `/* */` and `/** */` comments outside string literals,
/// splits their text on non-alphanumerics, lowercases, and drops stopwords
/// and single-character tokens.
CommentCorpus extract_comments(std::string_view source, const StopwordList& stopwords = StopwordList::builtin(),
                               std::string contract_name = {});

/// clamp(ceil(token_count / 25), 1, 20)
std::size_t keyword_count(std::size_t token_count);

struct CommentDims {
  Eigen::Index embed_dim = 64;
  Eigen::Index hidden_dim = 512;
  Eigen::Index output_dim = 512;
  std::size_t conv_layers = 4;
  Eigen::Index kernel = 3;  // odd; zero "same" padding
};

struct ConvLayer {
  Matrix weight;  // (kernel * in_channels) x out_channels, taps ordered left to right
  Matrix bias;    // 1 x out_channels
};

struct CommentParams {
  CommentDims dims;
  std::vector<ConvLayer> conv;
  Matrix proj_weight;  // hidden_dim x output_dim
  Matrix proj_bias;    // 1 x output_dim

  static CommentParams zeros(const CommentDims& dims);
  static CommentParams init(const CommentDims& dims, std::uint64_t seed);
  void validate() const;

  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    for (std::size_t l = 0; l < self.conv.size(); ++l) {
      f("comments.conv" + std::to_string(l) + ".weight", self.conv[l].weight);
      f("comments.conv" + std::to_string(l) + ".bias", self.conv[l].bias);
    }
    f("comments.proj_weight", self.proj_weight);
    f("comments.proj_bias", self.proj_bias);
  }
};

/// T x embed_dim matrix of hashed token embeddings.
Matrix token_matrix(const CommentCorpus& corpus, const embed::HashingEmbedder& embedder);

/// Convolution stack: each layer is ReLU(im2col(X) W + b).
ad::Var conv_stack(ad::Binder& bind, ad::Var tokens, const CommentParams& params);
/// Scaled dot-product self-attention; returns the 1 x T attention mass each
/// position receives, averaged over queries (sums to 1).
ad::Var attention_mass(ad::Var representations);

struct EncodedComments {
  ad::Var representations;  // T x hidden
  ad::Var attention;        // 1 x T
  ad::Var features;         // 1 x output
};

/// tokens must have at least one row.
EncodedComments encode_comments(ad::Binder& bind, const Matrix& tokens, const CommentParams& params);

struct KeywordEntry {
  std::string token;
  double weight = 0.0;
};

struct KeywordReport {
  std::string contract_name;
  std::vector<KeywordEntry> ranked;  // non-increasing weight, ties by token
  std::size_t k = 0;
};

KeywordReport score_keywords(const CommentCorpus& corpus, const CommentParams& params,
                             const embed::HashingEmbedder& embedder);

struct CommentFeatures {
  Vector values;
  bool no_comments = false;
};

CommentFeatures comment_features(const CommentCorpus& corpus, const CommentParams& params,
                                 const embed::HashingEmbedder& embedder);

/// CSV `token,total_weight,doc_count`, sorted by weight, then documents, then token.
std::string keyword_frequency_table(std::span<const KeywordReport> reports);

}  // namespace multicfv::comments

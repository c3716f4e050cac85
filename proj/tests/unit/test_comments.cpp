#include <gtest/gtest.h>

#include "helpers.hpp"
#include "multicfv/comments.hpp"
#include "multicfv/error.hpp"

using namespace multicfv;
using namespace multicfv::comments;
using testing_support::random_matrix;

namespace {

using Mat = std::vector<std::vector<double>>;

CommentDims tiny_dims(Eigen::Index kernel = 3) {
  CommentDims d;
  d.embed_dim = 16;
  d.hidden_dim = 5;
  d.output_dim = 4;
  d.conv_layers = 2;
  d.kernel = kernel;
  return d;
}

CommentCorpus corpus_of(std::vector<std::string> tokens) {
  CommentCorpus c;
  c.contract_name = "T.sol";
  c.tokens = std::move(tokens);
  return c;
}

// Loop reference for conv stack, attention mass and pooled projection.
struct OracleOut {
  std::vector<double> mass, features;
};

OracleOut oracle_encode(const Matrix& tokens, const CommentParams& p) {
  const long half = static_cast<long>(p.dims.kernel / 2);
  Mat x(static_cast<std::size_t>(tokens.rows()));
  for (long i = 0; i < tokens.rows(); ++i)
    for (long j = 0; j < tokens.cols(); ++j) x[i].push_back(tokens(i, j));
  const long t = static_cast<long>(x.size());
  for (const auto& layer : p.conv) {
    const long in = static_cast<long>(x[0].size()), out = layer.weight.cols();
    Mat y(t, std::vector<double>(out));
    for (long i = 0; i < t; ++i)
      for (long o = 0; o < out; ++o) {
        double acc = layer.bias(0, o);
        for (long s = -half; s <= half; ++s) {
          if (i + s < 0 || i + s >= t) continue;
          for (long c = 0; c < in; ++c) acc += x[i + s][c] * layer.weight((s + half) * in + c, o);
        }
        y[i][o] = std::max(0.0, acc);
      }
    x = std::move(y);
  }
  const long h = static_cast<long>(x[0].size());
  OracleOut r;
  r.mass.assign(t, 0.0);
  for (long i = 0; i < t; ++i) {
    std::vector<double> s(t);
    double mx = -1e300, z = 0;
    for (long j = 0; j < t; ++j) {
      s[j] = 0;
      for (long c = 0; c < h; ++c) s[j] += x[i][c] * x[j][c];
      s[j] /= std::sqrt(static_cast<double>(h));
      mx = std::max(mx, s[j]);
    }
    for (long j = 0; j < t; ++j) z += std::exp(s[j] - mx);
    for (long j = 0; j < t; ++j) r.mass[j] += std::exp(s[j] - mx) / z / static_cast<double>(t);
  }
  std::vector<double> pooled(h, 0.0);
  for (long j = 0; j < t; ++j)
    for (long c = 0; c < h; ++c) pooled[c] += r.mass[j] * x[j][c];
  for (long k = 0; k < p.proj_weight.cols(); ++k) {
    double acc = p.proj_bias(0, k);
    for (long c = 0; c < h; ++c) acc += pooled[c] * p.proj_weight(c, k);
    r.features.push_back(acc);
  }
  return r;
}

std::vector<std::string> ranking(const KeywordReport& r) {
  std::vector<std::string> out;
  for (const auto& e : r.ranked) out.push_back(e.token);
  return out;
}

}  // namespace

TEST(ExtractComments, LineCommentTokens) {
  const auto c = extract_comments("x = 1; // transfer tokens safely\n");
  EXPECT_EQ(c.tokens, (std::vector<std::string>{"transfer", "tokens", "safely"}));
}

TEST(ExtractComments, StringLiteralsAreNotComments) {
  const auto c = extract_comments("string s = \"// not a comment\"; string t = '/* nor */';");
  EXPECT_TRUE(c.empty());
  EXPECT_TRUE(c.raw_comment_spans.empty());
  EXPECT_TRUE(extract_comments("contract A { uint x; }").empty());
  EXPECT_TRUE(extract_comments("").empty());
}

TEST(ExtractComments, SpansMatchHandEnumeration) {
  const std::string src =
      "uint x; // alpha\nstring s = \"// not /* here\"; /* bravo\ncharlie */ y = '/*'; /** delta */\n/// echo";
  const auto c = extract_comments(src);
  EXPECT_EQ(c.raw_comment_spans, (std::vector<CommentSpan>{{8, 16}, {46, 65}, {76, 88}, {89, 97}}));
  EXPECT_EQ(c.tokens, (std::vector<std::string>{"alpha", "bravo", "charlie", "delta", "echo"}));
}

TEST(ExtractComments, EscapedQuoteAndUnterminatedBlock) {
  const auto c = extract_comments(R"(s = "a \" // still string"; // real)");
  EXPECT_EQ(c.tokens, std::vector<std::string>{"real"});
  const auto u = extract_comments("x; /* open forever");
  ASSERT_EQ(u.raw_comment_spans.size(), 1u);
  EXPECT_EQ(u.raw_comment_spans[0].end, 18u);
  EXPECT_EQ(u.tokens, (std::vector<std::string>{"open", "forever"}));
}

TEST(ExtractComments, CleaningRules) {
  const auto c = extract_comments("/// @notice The Owner's SafeMath-based x, 2 ++ v2\t\x01" "ctrl\n");
  // Lowercased, split on non-alphanumerics, stopwords and 1-char tokens removed.
  EXPECT_EQ(c.tokens, (std::vector<std::string>{"owner", "safemath", "based", "v2", "ctrl"}));
  for (const auto& t : c.tokens) {
    EXPECT_GE(t.size(), 2u);
    EXPECT_FALSE(StopwordList::builtin().contains(t));
    for (char ch : t) EXPECT_TRUE(std::isalnum(static_cast<unsigned char>(ch)));
  }
}

TEST(Stopwords, BuiltinAndCustomLists) {
  const auto& b = StopwordList::builtin();
  EXPECT_TRUE(b.contains("the"));
  EXPECT_TRUE(b.contains("param"));
  EXPECT_FALSE(b.contains("reentrancy"));
  const auto custom = StopwordList::parse("# header\nfoo\n  Bar \n\n");
  EXPECT_EQ(custom.size(), 2u);
  EXPECT_TRUE(custom.contains("bar"));
  EXPECT_EQ(extract_comments("// foo the bar baz", custom).tokens, (std::vector<std::string>{"the", "baz"}));
  EXPECT_THROW(StopwordList::load("/nonexistent/stopwords.txt"), Error);
}

TEST(KeywordCount, ClampedLinearRule) {
  EXPECT_EQ(keyword_count(0), 1u);
  EXPECT_EQ(keyword_count(1), 1u);
  EXPECT_EQ(keyword_count(25), 1u);
  EXPECT_EQ(keyword_count(26), 2u);
  EXPECT_EQ(keyword_count(500), 20u);
  EXPECT_EQ(keyword_count(501), 20u);
  EXPECT_EQ(keyword_count(100000), 20u);
}

TEST(Encode, MatchesLoopOracle) {
  Rng rng(31);
  embed::HashingEmbedder emb(16);
  const std::vector<std::string> vocab = {"owner", "transfer", "balance", "safemath", "require", "call", "ether"};
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = CommentParams::init(tiny_dims(trial % 2 ? 3 : 5), 500 + trial);
    std::vector<std::string> toks;
    const std::size_t n = 1 + rng.below(9);
    for (std::size_t i = 0; i < n; ++i) toks.push_back(vocab[rng.below(vocab.size())]);
    const auto corpus = corpus_of(toks);
    const Matrix tm = token_matrix(corpus, emb);
    ad::Tape tape;
    ad::Binder bind(tape);
    const auto enc = encode_comments(bind, tm, p);
    const auto expect = oracle_encode(tm, p);
    double total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(enc.attention.value()(0, static_cast<Eigen::Index>(j)), expect.mass[j], 1e-9);
      total += enc.attention.value()(0, static_cast<Eigen::Index>(j));
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    const auto feats = comment_features(corpus, p, emb);
    EXPECT_FALSE(feats.no_comments);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(feats.values(static_cast<Eigen::Index>(k)), expect.features[k], 1e-9);
  }
}

TEST(Encode, EmptyAndWrongWidthInputs) {
  const auto p = CommentParams::init(tiny_dims(), 1);
  ad::Tape tape;
  ad::Binder bind(tape);
  EXPECT_THROW(encode_comments(bind, Matrix(0, 16), p), Error);
  EXPECT_THROW(encode_comments(bind, Matrix::Ones(2, 8), p), Error);
}

TEST(ScoreKeywords, SingleTokenHasWeightOne) {
  embed::HashingEmbedder emb(16);
  const auto r = score_keywords(corpus_of({"reentrancy"}), CommentParams::init(tiny_dims(), 2), emb);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].token, "reentrancy");
  EXPECT_NEAR(r.ranked[0].weight, 1.0, 1e-12);
  EXPECT_EQ(r.k, 1u);
}

TEST(ScoreKeywords, DuplicatedTokenDominatesUnderIdentityParams) {
  CommentDims d = tiny_dims(1);
  d.hidden_dim = 16;
  d.conv_layers = 1;
  CommentParams p = CommentParams::zeros(d);
  p.conv[0].weight = Matrix::Identity(16, 16);
  embed::HashingEmbedder emb(16);
  std::vector<std::string> toks = {"alpha", "bravo", "alpha", "charlie", "delta"};
  for (int i = 0; i < 25; ++i) toks.push_back("pad" + std::to_string(i));
  const auto r = score_keywords(corpus_of(toks), p, emb);
  ASSERT_EQ(r.k, 2u);
  EXPECT_EQ(r.ranked.front().token, "alpha");
}

TEST(ScoreKeywords, RankedWeightsNonIncreasingAndBounded) {
  Rng rng(5);
  embed::HashingEmbedder emb(16);
  const auto p = CommentParams::init(tiny_dims(), 9);
  std::vector<std::string> toks;
  for (int i = 0; i < 90; ++i) toks.push_back("w" + std::to_string(rng.below(30)));
  const auto r = score_keywords(corpus_of(toks), p, emb);
  EXPECT_EQ(r.k, 4u);
  ASSERT_EQ(r.ranked.size(), 4u);
  for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_GE(r.ranked[i - 1].weight, r.ranked[i].weight);
  EXPECT_TRUE(score_keywords(corpus_of({}), p, emb).ranked.empty());
}

TEST(ScoreKeywords, StopwordInjectionKeepsRanking) {
  const std::string base = "// owner withdraws balance before the external call updates balance\n"
                           "/* reentrancy guard protects the vault owner */";
  const std::string noisy = "// the owner withdraws and balance before the external of call updates balance\n"
                            "/* reentrancy is guard protects the vault to owner with */";
  const auto a = extract_comments(base), b = extract_comments(noisy);
  EXPECT_EQ(a.tokens, b.tokens);
  embed::HashingEmbedder emb(16);
  const auto p = CommentParams::init(tiny_dims(), 4);
  EXPECT_EQ(ranking(score_keywords(a, p, emb)), ranking(score_keywords(b, p, emb)));
}

TEST(CommentFeatures, EmptyCorpusIsFlaggedZero) {
  embed::HashingEmbedder emb(16);
  const auto f = comment_features(corpus_of({}), CommentParams::init(tiny_dims(), 1), emb);
  EXPECT_TRUE(f.no_comments);
  EXPECT_TRUE(f.values.isZero());
  EXPECT_EQ(f.values.size(), 4);
}

TEST(CommentFeatures, Deterministic) {
  embed::HashingEmbedder emb(16);
  const auto p = CommentParams::init(tiny_dims(), 3);
  const auto c = corpus_of({"owner", "only", "modifier"});
  EXPECT_EQ(comment_features(c, p, emb).values, comment_features(c, p, emb).values);
}

TEST(CommentParams, ShapesAndValidation) {
  const auto p = CommentParams::init(CommentDims{}, 1);
  ASSERT_EQ(p.conv.size(), 4u);
  EXPECT_EQ(p.conv[0].weight.rows(), 3 * 64);
  EXPECT_EQ(p.conv[1].weight.rows(), 3 * 512);
  EXPECT_EQ(p.proj_weight.cols(), 512);
  EXPECT_NO_THROW(p.validate());
  CommentDims even = tiny_dims(2);
  EXPECT_THROW(CommentParams::init(even, 1), Error);
}

TEST(FrequencyTable, SingleReportVerbatim) {
  KeywordReport r{"A.sol", {{"owner", 0.5}, {"call", 0.25}}, 2};
  EXPECT_EQ(keyword_frequency_table(std::span(&r, 1)), "token,total_weight,doc_count\nowner,0.5,1\ncall,0.25,1\n");
}

TEST(FrequencyTable, DisjointUnionAndDominantToken) {
  std::vector<KeywordReport> reports = {
      {"A.sol", {{"safemath", 0.4}, {"owner", 0.3}}, 2},
      {"B.sol", {{"safemath", 0.5}, {"vault", 0.2}}, 2},
      {"C.sol", {{"safemath", 0.3}, {"call", 0.1}}, 2},
  };
  const std::string csv = keyword_frequency_table(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n', 29) + 1), "token,total_weight,doc_count\nsafemath,1.2,3\n");
  std::vector<KeywordReport> disjoint = {{"A.sol", {{"x1", 0.5}}, 1}, {"B.sol", {{"y1", 0.5}}, 1}};
  EXPECT_EQ(keyword_frequency_table(disjoint), "token,total_weight,doc_count\nx1,0.5,1\ny1,0.5,1\n");
}

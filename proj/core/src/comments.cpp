#include "multicfv/comments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "detail.hpp"

namespace multicfv::comments {
namespace detail {
extern const char* const kBuiltinStopwords;
}

using ad::Var;

const StopwordList& StopwordList::builtin() {
  static const StopwordList list = parse(detail::kBuiltinStopwords);
  return list;
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open stopword file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

StopwordList StopwordList::parse(std::string_view text) {
  StopwordList list;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string word;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (!word.empty()) list.words_.insert(std::move(word));
  }
  return list;
}

namespace {

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

void tokenize(std::string_view text, const StopwordList& stopwords, std::vector<std::string>& out) {
  std::string token;
  auto flush = [&] {
    if (token.size() >= 2 && !stopwords.contains(token)) out.push_back(token);
    token.clear();
  };
  for (char c : text) {
    if (is_alnum(c)) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

CommentCorpus extract_comments(std::string_view src, const StopwordList& stopwords, std::string contract_name) {
  CommentCorpus corpus;
  corpus.contract_name = std::move(contract_name);
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    const char c = src[i];
    if (c == '"' || c == '\'') {
      const char quote = c;
      ++i;
      while (i < n && src[i] != quote && src[i] != '\n') i += (src[i] == '\\' && i + 1 < n) ? 2 : 1;
      if (i < n) ++i;
    } else if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      const std::size_t start = i;
      std::size_t end = src.find('\n', i);
      if (end == std::string_view::npos) end = n;
      if (end > start && src[end - 1] == '\r') --end;
      tokenize(src.substr(start + 2, end - start - 2), stopwords, corpus.tokens);
      corpus.raw_comment_spans.push_back({start, end});
      i = end;
    } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const std::size_t start = i;
      std::size_t close = src.find("*/", i + 2);
      const std::size_t end = close == std::string_view::npos ? n : close + 2;
      const std::size_t text_end = close == std::string_view::npos ? n : close;
      tokenize(src.substr(start + 2, text_end - start - 2), stopwords, corpus.tokens);
      corpus.raw_comment_spans.push_back({start, end});
      i = end;
    } else {
      ++i;
    }
  }
  return corpus;
}

std::size_t keyword_count(std::size_t token_count) {
  const std::size_t k = (token_count + 24) / 25;
  return std::clamp<std::size_t>(k, 1, 20);
}

CommentParams CommentParams::zeros(const CommentDims& d) {
  if (d.kernel < 1 || d.kernel % 2 == 0) throw Error(ErrorKind::InvalidArgument, "conv kernel must be odd");
  CommentParams p;
  p.dims = d;
  Eigen::Index in = d.embed_dim;
  for (std::size_t l = 0; l < d.conv_layers; ++l) {
    p.conv.push_back({Matrix::Zero(d.kernel * in, d.hidden_dim), Matrix::Zero(1, d.hidden_dim)});
    in = d.hidden_dim;
  }
  p.proj_weight = Matrix::Zero(d.hidden_dim, d.output_dim);
  p.proj_bias = Matrix::Zero(1, d.output_dim);
  return p;
}

CommentParams CommentParams::init(const CommentDims& d, std::uint64_t seed) {
  CommentParams p = zeros(d);
  Rng rng(seed);
  p.visit([&](const std::string& name, Matrix& m) {
    if (!name.ends_with("bias")) m = multicfv::detail::xavier_uniform(m.rows(), m.cols(), rng);
  });
  return p;
}

void CommentParams::validate() const {
  if (dims.kernel < 1 || dims.kernel % 2 == 0) throw Error(ErrorKind::InvalidArgument, "conv kernel must be odd");
  if (conv.size() != dims.conv_layers) throw Error(ErrorKind::DimensionMismatch, "conv layer count mismatch");
  Eigen::Index in = dims.embed_dim;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const std::string name = "comments.conv" + std::to_string(l);
    multicfv::detail::expect_shape(conv[l].weight, dims.kernel * in, dims.hidden_dim, name + ".weight");
    multicfv::detail::expect_shape(conv[l].bias, 1, dims.hidden_dim, name + ".bias");
    in = dims.hidden_dim;
  }
  multicfv::detail::expect_shape(proj_weight, dims.hidden_dim, dims.output_dim, "comments.proj_weight");
  multicfv::detail::expect_shape(proj_bias, 1, dims.output_dim, "comments.proj_bias");
}

Matrix token_matrix(const CommentCorpus& corpus, const embed::HashingEmbedder& embedder) {
  Matrix m(static_cast<Eigen::Index>(corpus.tokens.size()), static_cast<Eigen::Index>(embedder.dim()));
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = embedder.embed_token(corpus.tokens[i]).transpose();
  return m;
}

Var conv_stack(ad::Binder& bind, Var tokens, const CommentParams& params) {
  const Eigen::Index half = params.dims.kernel / 2;
  Var x = tokens;
  for (const ConvLayer& layer : params.conv) {
    std::vector<Var> taps;
    for (Eigen::Index s = -half; s <= half; ++s) taps.push_back(s == 0 ? x : ad::shift_rows(x, s));
    Var cols = taps.size() == 1 ? taps.front() : ad::concat_cols(taps);
    x = ad::relu(ad::add_row(ad::matmul(cols, bind(layer.weight)), bind(layer.bias)));
  }
  return x;
}

Var attention_mass(Var reps) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(reps.cols()));
  Var scores = ad::scale(ad::matmul_bt(reps, reps), scale);
  Var attn = ad::softmax_rows(scores);
  return ad::scale(ad::sum_rows(attn), 1.0 / static_cast<double>(reps.rows()));
}

EncodedComments encode_comments(ad::Binder& bind, const Matrix& tokens, const CommentParams& params) {
  if (tokens.rows() == 0) throw Error(ErrorKind::InvalidArgument, "encode_comments needs at least one token");
  if (tokens.cols() != params.dims.embed_dim)
    throw Error(ErrorKind::DimensionMismatch, "token embedding width " + std::to_string(tokens.cols()) +
                                                  " != comments embed_dim " + std::to_string(params.dims.embed_dim));
  EncodedComments out;
  out.representations = conv_stack(bind, bind.tape().constant_ref(tokens), params);
  out.attention = attention_mass(out.representations);
  Var pooled = ad::matmul(out.attention, out.representations);
  out.features = ad::add_row(ad::matmul(pooled, bind(params.proj_weight)), bind(params.proj_bias));
  return out;
}

KeywordReport score_keywords(const CommentCorpus& corpus, const CommentParams& params,
                             const embed::HashingEmbedder& embedder) {
  KeywordReport report;
  report.contract_name = corpus.contract_name;
  if (corpus.empty()) return report;

  ad::Tape tape;
  ad::Binder bind(tape);
  const Matrix tokens = token_matrix(corpus, embedder);
  const Matrix mass = attention_mass(conv_stack(bind, tape.constant_ref(tokens), params)).value();

  std::map<std::string, double> per_token;
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i) per_token[corpus.tokens[i]] += mass(0, static_cast<Eigen::Index>(i));

  std::vector<KeywordEntry> all;
  for (auto& [tok, w] : per_token) all.push_back({tok, w});
  std::stable_sort(all.begin(), all.end(), [](const KeywordEntry& a, const KeywordEntry& b) { return a.weight > b.weight; });
  report.k = keyword_count(corpus.tokens.size());
  if (all.size() > report.k) all.resize(report.k);
  report.ranked = std::move(all);
  return report;
}

CommentFeatures comment_features(const CommentCorpus& corpus, const CommentParams& params,
                                 const embed::HashingEmbedder& embedder) {
  CommentFeatures out;
  if (corpus.empty()) {
    out.values = Vector::Zero(params.dims.output_dim);
    out.no_comments = true;
    return out;
  }
  ad::Tape tape;
  ad::Binder bind(tape);
  const Matrix tokens = token_matrix(corpus, embedder);
  out.values = encode_comments(bind, tokens, params).features.value().transpose();
  return out;
}

std::string keyword_frequency_table(std::span<const KeywordReport> reports) {
  struct Tally {
    double weight = 0.0;
    std::size_t docs = 0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& r : reports)
    for (const auto& e : r.ranked) {
      auto& t = tally[e.token];
      t.weight += e.weight;
      t.docs += 1;
    }
  std::vector<std::pair<std::string, Tally>> rows(tally.begin(), tally.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second.weight != b.second.weight) return a.second.weight > b.second.weight;
    return a.second.docs > b.second.docs;
  });
  std::string csv = "token,total_weight,doc_count\n";
  char buf[64];
  for (const auto& [tok, t] : rows) {
    std::snprintf(buf, sizeof buf, ",%.9g,%zu\n", t.weight, t.docs);
    csv += tok;
    csv += buf;
  }
  return csv;
}

}  // namespace multicfv::comments

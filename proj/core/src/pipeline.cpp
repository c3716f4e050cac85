#include "multicfv/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "multicfv/error.hpp"
#include "multicfv/feature_store.hpp"
#include "multicfv/random.hpp"

namespace multicfv::pipeline {
namespace fs = std::filesystem;

encoder::EncoderDims PipelineSettings::encoder_dims() const {
  encoder::EncoderDims d;
  d.input_dim = node_dim;
  d.hidden_dim = graph_hidden;
  d.fc_dim = graph_fc;
  d.output_dim = modality_dim;
  d.gru_layers = gru_layers;
  return d;
}

comments::CommentDims PipelineSettings::comment_dims() const {
  comments::CommentDims d;
  d.embed_dim = comment_embed;
  d.hidden_dim = comment_hidden;
  d.output_dim = modality_dim;
  d.conv_layers = comment_layers;
  d.kernel = comment_kernel;
  return d;
}

void PipelineSettings::validate() const {
  auto positive = [](Eigen::Index v, const char* what) {
    if (v <= 0) throw Error(ErrorKind::ConfigError, std::string(what) + " must be positive");
  };
  if (node_dim < 16) throw Error(ErrorKind::ConfigError, "node embedding dimension must be at least 16");
  if (comment_embed < 16) throw Error(ErrorKind::ConfigError, "comment embedding dimension must be at least 16");
  positive(modality_dim, "modality dimension");
  positive(graph_hidden, "graph hidden dimension");
  positive(graph_fc, "graph fc dimension");
  positive(comment_hidden, "comment hidden dimension");
  if (gru_layers == 0) throw Error(ErrorKind::ConfigError, "at least one GRU layer is required");
  if (comment_layers == 0) throw Error(ErrorKind::ConfigError, "at least one convolution layer is required");
  if (comment_kernel <= 0 || comment_kernel % 2 == 0) throw Error(ErrorKind::ConfigError, "comment kernel must be odd");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(ErrorKind::ConfigError, "dropout must lie in [0, 1)");
  if (stopwords_path && !fs::exists(*stopwords_path))
    throw Error(ErrorKind::ConfigError, "stopword file not found: " + stopwords_path->string());
}

model::Metadata PipelineSettings::to_metadata() const {
  model::Metadata m;
  m["pipeline.node_dim"] = std::to_string(node_dim);
  m["pipeline.node_seed"] = std::to_string(node_seed);
  m["pipeline.modality_dim"] = std::to_string(modality_dim);
  m["pipeline.graph_hidden"] = std::to_string(graph_hidden);
  m["pipeline.graph_fc"] = std::to_string(graph_fc);
  m["pipeline.gru_layers"] = std::to_string(gru_layers);
  m["pipeline.comment_embed"] = std::to_string(comment_embed);
  m["pipeline.comment_hidden"] = std::to_string(comment_hidden);
  m["pipeline.comment_layers"] = std::to_string(comment_layers);
  m["pipeline.comment_kernel"] = std::to_string(comment_kernel);
  m["pipeline.role_pairs"] = ast::format_role_pairs(role_pairs);
  m["pipeline.stopwords"] = stopwords_path ? stopwords_path->string() : "builtin";
  m["pipeline.model_seed"] = std::to_string(model_seed);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", dropout_p);
  m["pipeline.dropout"] = buf;
  return m;
}

namespace {

template <class T>
T meta_number(const model::Metadata& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw Error(ErrorKind::CorruptFile, "model metadata lacks " + key);
  T value{};
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(ErrorKind::CorruptFile, "bad metadata value for " + key);
  return value;
}

}  // namespace

PipelineSettings PipelineSettings::from_metadata(const model::Metadata& meta) {
  PipelineSettings s;
  s.node_dim = meta_number<Eigen::Index>(meta, "pipeline.node_dim");
  s.node_seed = meta_number<std::uint64_t>(meta, "pipeline.node_seed");
  s.modality_dim = meta_number<Eigen::Index>(meta, "pipeline.modality_dim");
  s.graph_hidden = meta_number<Eigen::Index>(meta, "pipeline.graph_hidden");
  s.graph_fc = meta_number<Eigen::Index>(meta, "pipeline.graph_fc");
  s.gru_layers = meta_number<std::size_t>(meta, "pipeline.gru_layers");
  s.comment_embed = meta_number<Eigen::Index>(meta, "pipeline.comment_embed");
  s.comment_hidden = meta_number<Eigen::Index>(meta, "pipeline.comment_hidden");
  s.comment_layers = meta_number<std::size_t>(meta, "pipeline.comment_layers");
  s.comment_kernel = meta_number<Eigen::Index>(meta, "pipeline.comment_kernel");
  s.model_seed = meta_number<std::uint64_t>(meta, "pipeline.model_seed");
  s.dropout_p = meta_number<double>(meta, "pipeline.dropout");
  auto pairs = meta.find("pipeline.role_pairs");
  if (pairs == meta.end()) throw Error(ErrorKind::CorruptFile, "model metadata lacks pipeline.role_pairs");
  s.role_pairs = ast::parse_role_pairs(pairs->second);
  auto sw = meta.find("pipeline.stopwords");
  if (sw != meta.end() && sw->second != "builtin") s.stopwords_path = fs::path(sw->second);
  return s;
}

model::FeatureModel init_feature_model(const PipelineSettings& s) {
  s.validate();
  model::FeatureModel m;
  m.graph = encoder::EncoderParams::init(s.encoder_dims(), s.model_seed);
  m.graph.dropout_p = s.dropout_p;
  m.ast = ast::AstProjection::init(s.ast_raw_dim(), s.modality_dim, s.model_seed + 1);
  m.comments = comments::CommentParams::init(s.comment_dims(), s.model_seed + 2);
  return m;
}

Discovery discover_contracts(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::NotFound, "not a directory: " + dir.string());
  struct Members {
    std::optional<fs::path> sol, bin, ast;
  };
  std::map<std::string, Members> groups;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string file = entry.path().filename().string();
    auto ends = [&](std::string_view suffix) {
      return file.size() > suffix.size() && file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    auto stem = [&](std::string_view suffix) { return file.substr(0, file.size() - suffix.size()); };
    if (ends(".bin-runtime"))
      groups[stem(".bin-runtime")].bin = entry.path();
    else if (ends(".ast.json"))
      groups[stem(".ast.json")].ast = entry.path();
    else if (ends(".sol"))
      groups[stem(".sol")].sol = entry.path();
  }

  Discovery out;
  for (const auto& [stem, m] : groups) {
    const std::string name = stem + ".sol";
    if (!m.bin || !m.ast) {
      out.diagnostics.push_back("skip " + name + ": missing " +
                                std::string(!m.bin ? "bytecode (.bin-runtime)" : "AST (.ast.json)"));
      continue;
    }
    ContractInputs in;
    in.name = name;
    in.bytecode_hex = store::read_file(*m.bin);
    in.ast_json = store::read_file(*m.ast);
    if (m.sol) {
      in.source = store::read_file(*m.sol);
      in.source_path = *m.sol;
    } else {
      out.diagnostics.push_back("note " + name + ": no source file, comment modality empty");
    }
    out.contracts.push_back(std::move(in));
  }
  return out;
}

ContractInputs load_contract(const fs::path& any_member) {
  std::string file = any_member.filename().string();
  for (std::string_view suffix : {".bin-runtime", ".ast.json", ".sol"}) {
    if (file.size() > suffix.size() && file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0) {
      file.resize(file.size() - suffix.size());
      break;
    }
  }
  const fs::path base = any_member.parent_path() / file;
  auto with = [&](const char* suffix) {
    fs::path p = base;
    p += suffix;
    return p;
  };
  ContractInputs in;
  in.name = file + ".sol";
  const fs::path bin = with(".bin-runtime"), astp = with(".ast.json"), sol = with(".sol");
  if (!fs::exists(bin)) throw Error(ErrorKind::NotFound, "missing bytecode " + bin.string());
  if (!fs::exists(astp)) throw Error(ErrorKind::NotFound, "missing AST " + astp.string());
  in.bytecode_hex = store::read_file(bin);
  in.ast_json = store::read_file(astp);
  if (fs::exists(sol)) {
    in.source = store::read_file(sol);
    in.source_path = sol;
  }
  return in;
}

Pipeline::Pipeline(PipelineSettings settings, model::FeatureModel model)
    : settings_(std::move(settings)),
      model_(std::move(model)),
      blocks_(static_cast<std::size_t>(settings_.node_dim), settings_.node_seed),
      tokens_(static_cast<std::size_t>(settings_.comment_embed)),
      stopwords_(settings_.stopwords_path ? comments::StopwordList::load(*settings_.stopwords_path)
                                          : comments::StopwordList::builtin()) {
  settings_.validate();
  model_.graph.validate();
  model_.ast.validate(settings_.ast_raw_dim(), settings_.modality_dim);
  model_.comments.validate();
  if (model_.graph.dims.output_dim != settings_.modality_dim || model_.comments.dims.output_dim != settings_.modality_dim ||
      model_.graph.dims.input_dim != settings_.node_dim || model_.comments.dims.embed_dim != settings_.comment_embed)
    throw Error(ErrorKind::DimensionMismatch, "feature model does not match pipeline settings");
}

Pipeline Pipeline::initialize(const PipelineSettings& settings) { return Pipeline(settings, init_feature_model(settings)); }

PreparedContract Pipeline::prepare(const ContractInputs& inputs) const {
  PreparedContract out;
  out.name = cfg::normalize_contract_name(inputs.name);
  out.source_path = inputs.source_path;
  out.graph = cfg::build_cfg(inputs.bytecode_hex, out.name);
  if (out.graph.blocks.empty()) throw Error(ErrorKind::InvalidArgument, out.name + ": bytecode has no instructions");
  Matrix nf = embed::node_features(out.graph, blocks_);
  out.graph_input = encoder::prepare_graph_input(embed::assemble_ocfg(out.graph, std::move(nf)));
  const ast::AstTree tree = ast::parse_ast(inputs.ast_json, out.name);
  out.ast_raw = ast::ast_statistics(tree, settings_.role_pairs).flatten();
  out.corpus = comments::extract_comments(inputs.source.value_or(std::string{}), stopwords_, out.name);
  out.comment_tokens = comments::token_matrix(out.corpus, tokens_);
  return out;
}

ad::Var Pipeline::modalities(ad::Binder& bind, const PreparedContract& c, const model::FeatureModel& w,
                             const encoder::Dropout& dropout) const {
  ad::Tape& tape = bind.tape();
  ad::Var f_cfg = encoder::encode_graph(bind, c.graph_input, w.graph, dropout);
  ad::Var f_ast = ast::project_ast_features(bind, tape.constant(c.ast_raw.transpose()), w.ast);
  ad::Var f_com = c.comment_tokens.rows() == 0 ? tape.constant(Matrix::Zero(1, settings_.modality_dim))
                                               : comments::encode_comments(bind, c.comment_tokens, w.comments).features;
  return ad::concat_cols({f_cfg, f_ast, f_com});
}

fusion::ContractFeatures Pipeline::extract(const PreparedContract& c) const {
  ad::Tape tape;
  ad::Binder bind(tape);
  const Matrix row = modalities(bind, c, model_, {}).value();
  const Eigen::Index d = settings_.modality_dim;
  fusion::ContractFeatures f = fusion::fuse(c.name, row.block(0, 0, 1, d).transpose(), row.block(0, d, 1, d).transpose(),
                                            row.block(0, 2 * d, 1, d).transpose(), d);
  f.no_comments = c.comment_tokens.rows() == 0;
  return f;
}

comments::KeywordReport Pipeline::keywords(const PreparedContract& c) const {
  return comments::score_keywords(c.corpus, model_.comments, tokens_);
}

void save_feature_model(const fs::path& path, const PipelineSettings& settings, const model::FeatureModel& m) {
  model::save_tensors(path, model::named_tensors(m), settings.to_metadata());
}

Pipeline load_feature_model(const fs::path& path) {
  const model::TensorFile file = model::load_tensors(path);
  PipelineSettings s = PipelineSettings::from_metadata(file.meta);
  model::FeatureModel m = init_feature_model(s);
  model::assign_tensors(m, file);
  return Pipeline(std::move(s), std::move(m));
}

}  // namespace multicfv::pipeline

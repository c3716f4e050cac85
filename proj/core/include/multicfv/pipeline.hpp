#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "multicfv/ast.hpp"
#include "multicfv/cfg.hpp"
#include "multicfv/comments.hpp"
#include "multicfv/embedding.hpp"
#include "multicfv/fusion.hpp"
#include "multicfv/model.hpp"

namespace multicfv::pipeline {

/// Everything that shapes the extracted features. Persisted as metadata next
/// to the weights so that a model file can rebuild its own extractor.
struct PipelineSettings {
  Eigen::Index node_dim = 128;
  std::uint64_t node_seed = 0x6d636676ULL;
  Eigen::Index modality_dim = fusion::kModalityDim;
  Eigen::Index graph_hidden = 512;
  Eigen::Index graph_fc = 512;
  std::size_t gru_layers = 3;
  Eigen::Index comment_embed = 64;
  Eigen::Index comment_hidden = 512;
  std::size_t comment_layers = 4;
  Eigen::Index comment_kernel = 3;
  std::vector<ast::RolePair> role_pairs = ast::default_role_pairs();
  std::optional<std::filesystem::path> stopwords_path;
  std::uint64_t model_seed = 1;
  double dropout_p = 0.3;

  encoder::EncoderDims encoder_dims() const;
  comments::CommentDims comment_dims() const;
  Eigen::Index ast_raw_dim() const { return static_cast<Eigen::Index>(ast::raw_feature_width(role_pairs.size())); }
  void validate() const;

  model::Metadata to_metadata() const;
  static PipelineSettings from_metadata(const model::Metadata& meta);
};

model::FeatureModel init_feature_model(const PipelineSettings& settings);

/// One contract as three sibling files: `<name>.sol`, `<name>.bin-runtime`, `<name>.ast.json`.
struct ContractInputs {
  std::string name;  // with the .sol suffix
  std::string bytecode_hex;
  std::string ast_json;
  std::optional<std::string> source;
  std::optional<std::filesystem::path> source_path;
};

struct Discovery {
  std::vector<ContractInputs> contracts;  // name ascending
  std::vector<std::string> diagnostics;
};

/// Groups files in dir by stem. Contracts lacking bytecode or AST are
/// skipped with a diagnostic; a missing .sol only loses the comment modality.
Discovery discover_contracts(const std::filesystem::path& dir);
ContractInputs load_contract(const std::filesystem::path& any_member);

/// Deterministic, weight-independent preprocessing of one contract.
struct PreparedContract {
  std::string name;
  cfg::ControlFlowGraph graph;
  encoder::GraphInput graph_input;
  Vector ast_raw;
  comments::CommentCorpus corpus;
  Matrix comment_tokens;  // T x comment_embed, T may be zero
  std::optional<std::filesystem::path> source_path;
};

class Pipeline {
 public:
  Pipeline(PipelineSettings settings, model::FeatureModel model);
  static Pipeline initialize(const PipelineSettings& settings);

  PreparedContract prepare(const ContractInputs& inputs) const;

  /// 1 x (3 * modality_dim) concatenation [F_cfg | F_ast | F_com] on the tape.
  ad::Var modalities(ad::Binder& bind, const PreparedContract& contract, const model::FeatureModel& weights,
                     const encoder::Dropout& dropout) const;

  fusion::ContractFeatures extract(const PreparedContract& contract) const;
  fusion::ContractFeatures extract(const ContractInputs& inputs) const { return extract(prepare(inputs)); }

  comments::KeywordReport keywords(const PreparedContract& contract) const;

  const PipelineSettings& settings() const { return settings_; }
  const model::FeatureModel& model() const { return model_; }
  model::FeatureModel& model() { return model_; }
  const comments::StopwordList& stopwords() const { return stopwords_; }

 private:
  PipelineSettings settings_;
  model::FeatureModel model_;
  embed::BlockEmbedder blocks_;
  embed::HashingEmbedder tokens_;
  comments::StopwordList stopwords_;
};

void save_feature_model(const std::filesystem::path& path, const PipelineSettings& settings,
                        const model::FeatureModel& model);
Pipeline load_feature_model(const std::filesystem::path& path);

}  // namespace multicfv::pipeline

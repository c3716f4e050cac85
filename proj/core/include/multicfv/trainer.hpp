#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "multicfv/feature_store.hpp"
#include "multicfv/model.hpp"
#include "multicfv/pipeline.hpp"

namespace multicfv::train {

struct TrainConfig {
  double lr = 0.005;
  /// Learning rate for the extractor weights in end-to-end mode; defaults to lr.
  std::optional<double> encoder_lr;
  std::size_t epochs = 500;
  double dropout_p = 0.3;
  double split = 0.8;
  double decision_threshold = 0.95;
  std::uint64_t seed = 1;
  std::size_t smote_k = 5;
  double jitter_sigma = 0.01;
  std::size_t batch_size = 32;
  Eigen::Index hidden_dim = 128;
  bool balance = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  store::Vulnerability vulnerability = store::Vulnerability::Reentrancy;

  /// Throws Error(ConfigError) on out-of-range values.
  void validate() const;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double auc = 0.5;
};

/// Positive prediction means score > threshold.
Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold);
/// Mann-Whitney statistic with average ranks for ties; 0.5 when a class is absent.
double rank_auc(std::span<const double> scores, std::span<const int> labels);
Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);

struct SmoteDraw {
  std::size_t base = 0;      // index of x_i in the minority list
  std::size_t neighbor = 0;  // index of x_j
  double u = 0.0;
};

struct SmoteResult {
  /// The minority samples followed by target_count - minority.size() synthetics.
  std::vector<Vector> samples;
  /// One draw per synthetic, in order: samples[minority.size() + s] comes from draws[s].
  std::vector<SmoteDraw> draws;
};

/// x_new = x_i + u (x_j - x_i) with x_j among the k nearest (Euclidean)
/// minority neighbours of x_i. Base points cycle through the minority list.
/// Throws TooFewSamples unless minority.size() >= 2 and k < minority.size().
SmoteResult smote_balance(const std::vector<Vector>& minority, std::size_t target_count, std::size_t k,
                          std::uint64_t seed);

/// A labelled, already-extracted sample (flattened modality features).
struct Example {
  std::string name;
  Vector features;
  int label = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // BCE of the post-epoch parameters over the training set, dropout off
  Metrics metrics;    // held-out split
};

struct TrainResult {
  model::ClassifierHead head;                   // checkpoint with the lowest epoch loss
  std::optional<model::FeatureModel> features;  // end-to-end mode only
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  Metrics test_metrics;   // checkpoint on the held-out split
  Metrics train_metrics;  // checkpoint on the original (unbalanced) training split
  std::vector<std::size_t> train_indices, test_indices;
  std::size_t synthetic_count = 0;
};

/// Stratified split; returns (train, test) index lists. Each class keeps at
/// least one training sample.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                              double train_fraction,
                                                                              std::uint64_t seed);

/// Trains the classifier head over fixed modality features.
TrainResult train(const std::vector<Example>& dataset, const TrainConfig& config);

/// Trains the classifier head together with the graph encoder and the
/// syntax/comment projections; minority samples are oversampled by repetition.
TrainResult train_end_to_end(const pipeline::Pipeline& pipeline, const std::vector<pipeline::PreparedContract>& contracts,
                             const std::vector<int>& labels, const TrainConfig& config);

std::vector<double> predict(const model::ClassifierHead& head, const std::vector<Example>& examples);
Metrics evaluate(const model::ClassifierHead& head, const std::vector<Example>& test_set, double threshold);

/// CSV with columns epoch,loss,acc,re,pre,f1.
std::string history_csv(const std::vector<EpochRecord>& history);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  Eigen::Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using NamedParams = std::vector<std::pair<std::string, Matrix*>>;
/// Builds a scalar loss on the binder's tape.
using LossFn = std::function<ad::Var(ad::Binder&)>;

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central finite differences on up to max_params scalars drawn without
/// replacement. epsilon must lie in [1e-7, 1e-4].
GradCheckResult grad_check(const LossFn& loss, const NamedParams& params, double epsilon, std::size_t max_params = 200,
                           std::uint64_t seed = 1);

/// Whole differentiable path for one contract: extractor weights, fusion
/// concatenation and classifier head, dropout off.
GradCheckResult grad_check(model::FeatureModel& features, model::ClassifierHead& head, const pipeline::Pipeline& pipeline,
                           const pipeline::PreparedContract& sample, int label, double epsilon,
                           std::size_t max_params = 200, std::uint64_t seed = 1);

/// Everything `verify` needs: extractor settings and weights plus one
/// vulnerability-specific classifier head.
struct TrainedModel {
  pipeline::PipelineSettings settings;
  model::FeatureModel features;
  model::ClassifierHead head;
  store::Vulnerability vulnerability = store::Vulnerability::Reentrancy;
  double threshold = 0.95;
  std::string mode = "head";
};

void save_model(const std::filesystem::path& path, const TrainedModel& model);
/// Throws Error(ModelMissing) when the file or its manifest is absent.
TrainedModel load_model(const std::filesystem::path& path);

struct Verdict {
  store::Vulnerability vulnerability = store::Vulnerability::Reentrancy;
  double probability = 0.0;
  double threshold = 0.95;
  bool positive = false;  // probability > threshold
};

Verdict verify(const pipeline::Pipeline& pipeline, const model::ClassifierHead& head,
               const pipeline::PreparedContract& contract, store::Vulnerability vulnerability, double threshold);

}  // namespace multicfv::train

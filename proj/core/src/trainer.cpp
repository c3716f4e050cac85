#include "multicfv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "multicfv/error.hpp"
#include "multicfv/random.hpp"

namespace multicfv::train {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::ConfigError, what); };
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad("learning rate must be finite and non-negative");
  if (encoder_lr && (!(*encoder_lr >= 0.0) || !std::isfinite(*encoder_lr))) bad("encoder learning rate must be finite and non-negative");
  if (epochs == 0) bad("epochs must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(split > 0.0 && split < 1.0)) bad("split must lie in (0, 1)");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) bad("decision threshold must lie in (0, 1)");
  if (smote_k == 0) bad("smote_k must be positive");
  if (!(jitter_sigma >= 0.0)) bad("jitter sigma must be non-negative");
  if (batch_size == 0) bad("batch size must be positive");
  if (hidden_dim <= 0) bad("hidden dimension must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) bad("Adam epsilon must be positive");
}

// ---------------------------------------------------------------- metrics

Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] != 0) {
      pos += 1;
      rank_sum += rank[i];
    }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) return 0.5;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  const Confusion c = confusion(scores, labels, threshold);
  Metrics m;
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.auc = rank_auc(scores, labels);
  return m;
}

// ------------------------------------------------------------------ SMOTE

SmoteResult smote_balance(const std::vector<Vector>& minority, std::size_t target_count, std::size_t k,
                          std::uint64_t seed) {
  const std::size_t n = minority.size();
  if (n < 2) throw Error(ErrorKind::TooFewSamples, "SMOTE needs at least two minority samples, got " + std::to_string(n));
  if (k == 0 || k >= n)
    throw Error(ErrorKind::TooFewSamples,
                "SMOTE neighbour count " + std::to_string(k) + " must lie in [1, " + std::to_string(n - 1) + "]");
  if (target_count < n) throw Error(ErrorKind::InvalidArgument, "target count below minority size");
  for (const auto& x : minority)
    if (x.size() != minority[0].size()) throw Error(ErrorKind::DimensionMismatch, "SMOTE samples differ in length");

  // k nearest neighbours of every point, ties broken by index.
  std::vector<std::vector<std::size_t>> knn(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.emplace_back((minority[i] - minority[j]).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    for (std::size_t t = 0; t < k; ++t) knn[i].push_back(d[t].second);
  }

  SmoteResult out;
  out.samples = minority;
  out.samples.reserve(target_count);
  Rng rng(seed);
  for (std::size_t s = 0; n + s < target_count; ++s) {
    SmoteDraw draw;
    draw.base = s % n;
    draw.neighbor = knn[draw.base][rng.below(k)];
    draw.u = rng.uniform();
    const Vector& xi = minority[draw.base];
    out.samples.push_back(xi + draw.u * (minority[draw.neighbor] - xi));
    out.draws.push_back(draw);
  }
  return out;
}

// ------------------------------------------------------------------ split

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const int> labels,
                                                                              double train_fraction,
                                                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> train, test;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if ((labels[i] != 0) == (cls != 0)) idx.push_back(i);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    std::size_t n_test = static_cast<std::size_t>(std::llround((1.0 - train_fraction) * static_cast<double>(idx.size())));
    if (!idx.empty() && n_test >= idx.size()) n_test = idx.size() - 1;
    test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

// --------------------------------------------------------------- training

namespace {

class Adam {
 public:
  explicit Adam(const TrainConfig& c) : beta1_(c.beta1), beta2_(c.beta2), eps_(c.adam_eps) {}

  template <class T>
  void add_all(T& params, double lr) {
    params.visit([&](const std::string&, Matrix& m) { slots_.push_back({&m, Matrix(), Matrix::Zero(m.rows(), m.cols()),
                                                                        Matrix::Zero(m.rows(), m.cols()), lr}); });
  }

  void zero_grad() {
    for (auto& s : slots_) s.grad = Matrix::Zero(s.value->rows(), s.value->cols());
  }

  void bind(ad::Binder& b) {
    for (auto& s : slots_) b.set_trainable(*s.value, &s.grad);
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& s : slots_) {
      s.m = beta1_ * s.m + (1.0 - beta1_) * s.grad;
      s.v = beta2_ * s.v + (1.0 - beta2_) * s.grad.cwiseProduct(s.grad);
      const Matrix update = (s.m / c1).array() / ((s.v / c2).array().sqrt() + eps_);
      *s.value -= s.lr * update;
    }
  }

 private:
  struct Slot {
    Matrix* value;
    Matrix grad, m, v;
    double lr;
  };
  double beta1_, beta2_, eps_;
  std::vector<Slot> slots_;
  std::size_t t_ = 0;
};

Vector labels_vector(std::span<const int> labels, std::span<const std::size_t> idx) {
  Vector y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[idx[i]] != 0 ? 1.0 : 0.0;
  return y;
}

double mean_bce(const Vector& p, const Vector& y) {
  ad::Tape tape;
  return ad::binary_cross_entropy(tape.constant(p), y).value()(0, 0);
}

Vector probabilities(const model::ClassifierHead& head, const Matrix& rows) {
  ad::Tape tape;
  ad::Binder bind(tape);
  return model::classify(bind, tape.constant_ref(rows), head, {}).value().col(0);
}

std::vector<int> pick(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

Metrics metrics_of(const Vector& p, std::span<const int> y, double threshold) {
  std::vector<double> s(p.data(), p.data() + p.size());
  return compute_metrics(s, y, threshold);
}

void check_labels(std::span<const int> labels) {
  for (int l : labels)
    if (l != 0 && l != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
}

// Minority label and per-class counts over the given indices; DegenerateLabels
// when only one class is present.
int minority_label(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::size_t pos = 0;
  for (auto i : idx) pos += labels[i] != 0;
  const std::size_t neg = idx.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::DegenerateLabels, "training split holds a single class");
  return pos <= neg ? 1 : 0;
}

// One optimisation epoch over `order`, shuffled in place.
template <class BatchLoss>
void run_epoch(std::vector<std::size_t>& order, std::size_t batch_size, Rng& rng, Adam& adam, BatchLoss&& batch_loss) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::span<const std::size_t> batch(order.data() + start, end - start);
    adam.zero_grad();
    ad::Tape tape;
    ad::Binder bind(tape);
    adam.bind(bind);
    ad::Var loss = batch_loss(bind, batch);
    if (!std::isfinite(loss.value()(0, 0))) throw Error(ErrorKind::InvalidArgument, "non-finite training loss");
    tape.backward(loss);
    adam.step();
  }
}

}  // namespace

TrainResult train(const std::vector<Example>& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "no training examples");
  const Eigen::Index dim = dataset[0].features.size();
  std::vector<int> labels;
  for (const auto& e : dataset) {
    if (e.features.size() != dim) throw Error(ErrorKind::DimensionMismatch, "example " + e.name + " has a different width");
    if (!e.features.allFinite()) throw Error(ErrorKind::InvalidArgument, "example " + e.name + " has non-finite features");
    labels.push_back(e.label);
  }
  check_labels(labels);

  TrainResult result;
  std::tie(result.train_indices, result.test_indices) = stratified_split(labels, config.split, config.seed);
  const int minority = minority_label(labels, result.train_indices);

  // Balanced training rows: originals, then SMOTE synthetics with jitter.
  std::vector<Vector> rows;
  std::vector<int> row_labels;
  std::vector<Vector> minority_rows;
  std::size_t majority_count = 0;
  for (auto i : result.train_indices) {
    rows.push_back(dataset[i].features);
    row_labels.push_back(labels[i]);
    if (labels[i] == minority) minority_rows.push_back(dataset[i].features);
    else ++majority_count;
  }
  if (config.balance && minority_rows.size() < majority_count) {
    if (minority_rows.size() < 2)
      throw Error(ErrorKind::TooFewSamples, "SMOTE needs at least two minority training samples");
    const std::size_t k = std::min(config.smote_k, minority_rows.size() - 1);
    SmoteResult sm = smote_balance(minority_rows, majority_count, k, config.seed ^ 0x5d0be11ULL);
    Rng jitter(config.seed ^ 0x717ee5ULL);
    for (std::size_t s = minority_rows.size(); s < sm.samples.size(); ++s) {
      Vector x = sm.samples[s];
      if (config.jitter_sigma > 0)
        for (Eigen::Index c = 0; c < x.size(); ++c) x(c) += config.jitter_sigma * jitter.normal();
      rows.push_back(std::move(x));
      row_labels.push_back(minority);
      ++result.synthetic_count;
    }
  }

  Matrix X(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) X.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  const Vector Y = labels_vector(row_labels, all);

  Matrix X_test(static_cast<Eigen::Index>(result.test_indices.size()), dim);
  for (std::size_t r = 0; r < result.test_indices.size(); ++r)
    X_test.row(static_cast<Eigen::Index>(r)) = dataset[result.test_indices[r]].features.transpose();
  const std::vector<int> y_test = pick(labels, result.test_indices);

  model::ClassifierHead head = model::ClassifierHead::init(dim, config.hidden_dim, config.seed);
  Adam adam(config);
  adam.add_all(head, config.lr);
  Rng rng(config.seed ^ 0xd4e1ULL);
  const encoder::Dropout dropout{config.dropout_p, &rng};

  std::vector<std::size_t> order = all;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    run_epoch(order, config.batch_size, rng, adam, [&](ad::Binder& bind, std::span<const std::size_t> batch) {
      Matrix xb(static_cast<Eigen::Index>(batch.size()), dim);
      Vector yb(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t b = 0; b < batch.size(); ++b) {
        xb.row(static_cast<Eigen::Index>(b)) = X.row(static_cast<Eigen::Index>(batch[b]));
        yb(static_cast<Eigen::Index>(b)) = Y(static_cast<Eigen::Index>(batch[b]));
      }
      ad::Var p = model::classify(bind, bind.tape().constant(std::move(xb)), head, dropout);
      return ad::binary_cross_entropy(p, yb);
    });
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = mean_bce(probabilities(head, X), Y);
    if (!std::isfinite(rec.loss)) throw Error(ErrorKind::InvalidArgument, "non-finite epoch loss");
    if (X_test.rows() > 0) rec.metrics = metrics_of(probabilities(head, X_test), y_test, config.decision_threshold);
    if (rec.loss < result.best_loss) {
      result.best_loss = rec.loss;
      result.best_epoch = epoch;
      result.head = head;
    }
    result.history.push_back(rec);
  }

  if (X_test.rows() > 0) result.test_metrics = metrics_of(probabilities(result.head, X_test), y_test, config.decision_threshold);
  Matrix X_train(static_cast<Eigen::Index>(result.train_indices.size()), dim);
  for (std::size_t r = 0; r < result.train_indices.size(); ++r)
    X_train.row(static_cast<Eigen::Index>(r)) = dataset[result.train_indices[r]].features.transpose();
  result.train_metrics =
      metrics_of(probabilities(result.head, X_train), pick(labels, result.train_indices), config.decision_threshold);
  return result;
}

TrainResult train_end_to_end(const pipeline::Pipeline& pipe, const std::vector<pipeline::PreparedContract>& contracts,
                             const std::vector<int>& labels, const TrainConfig& config) {
  config.validate();
  if (contracts.empty()) throw Error(ErrorKind::EmptyDataset, "no training contracts");
  if (labels.size() != contracts.size()) throw Error(ErrorKind::DimensionMismatch, "one label per contract required");
  check_labels(labels);

  TrainResult result;
  std::tie(result.train_indices, result.test_indices) = stratified_split(labels, config.split, config.seed);
  const int minority = minority_label(labels, result.train_indices);

  // Training list of contract indices, minority repeated until balanced.
  std::vector<std::size_t> rows = result.train_indices;
  std::vector<std::size_t> minority_idx;
  std::size_t majority_count = 0;
  for (auto i : result.train_indices) {
    if (labels[i] == minority) minority_idx.push_back(i);
    else ++majority_count;
  }
  if (config.balance) {
    Rng pick_rng(config.seed ^ 0x5d0be11ULL);
    for (std::size_t have = minority_idx.size(); have < majority_count; ++have) {
      rows.push_back(minority_idx[pick_rng.below(minority_idx.size())]);
      ++result.synthetic_count;
    }
  }
  const Vector Y = labels_vector(labels, rows);
  const Eigen::Index width = 3 * pipe.settings().modality_dim;

  model::FeatureModel features = pipe.model();
  model::ClassifierHead head = model::ClassifierHead::init(width, config.hidden_dim, config.seed);
  Adam adam(config);
  adam.add_all(head, config.lr);
  adam.add_all(features, config.encoder_lr.value_or(config.lr));
  Rng rng(config.seed ^ 0xd4e1ULL);
  const encoder::Dropout dropout{config.dropout_p, &rng};

  auto eval_rows = [&](const model::FeatureModel& w, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), width);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      ad::Tape tape;
      ad::Binder bind(tape);
      out.row(static_cast<Eigen::Index>(r)) = pipe.modalities(bind, contracts[idx[r]], w, {}).value();
    }
    return out;
  };
  const std::vector<int> y_test = pick(labels, result.test_indices);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  result.best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    run_epoch(order, config.batch_size, rng, adam, [&](ad::Binder& bind, std::span<const std::size_t> batch) {
      std::vector<ad::Var> parts;
      Vector yb(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t b = 0; b < batch.size(); ++b) {
        parts.push_back(pipe.modalities(bind, contracts[rows[batch[b]]], features, dropout));
        yb(static_cast<Eigen::Index>(b)) = Y(static_cast<Eigen::Index>(batch[b]));
      }
      ad::Var p = model::classify(bind, ad::stack_rows(parts), head, dropout);
      return ad::binary_cross_entropy(p, yb);
    });
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = mean_bce(probabilities(head, eval_rows(features, rows)), Y);
    if (!std::isfinite(rec.loss)) throw Error(ErrorKind::InvalidArgument, "non-finite epoch loss");
    if (!result.test_indices.empty())
      rec.metrics = metrics_of(probabilities(head, eval_rows(features, result.test_indices)), y_test, config.decision_threshold);
    if (rec.loss < result.best_loss) {
      result.best_loss = rec.loss;
      result.best_epoch = epoch;
      result.head = head;
      result.features = features;
    }
    result.history.push_back(rec);
  }

  if (!result.test_indices.empty())
    result.test_metrics =
        metrics_of(probabilities(result.head, eval_rows(*result.features, result.test_indices)), y_test, config.decision_threshold);
  result.train_metrics = metrics_of(probabilities(result.head, eval_rows(*result.features, result.train_indices)),
                                    pick(labels, result.train_indices), config.decision_threshold);
  return result;
}

std::vector<double> predict(const model::ClassifierHead& head, const std::vector<Example>& examples) {
  if (examples.empty()) return {};
  Matrix X(static_cast<Eigen::Index>(examples.size()), head.input_dim());
  for (std::size_t r = 0; r < examples.size(); ++r) {
    if (examples[r].features.size() != head.input_dim())
      throw Error(ErrorKind::DimensionMismatch, "example " + examples[r].name + " does not match the classifier width");
    X.row(static_cast<Eigen::Index>(r)) = examples[r].features.transpose();
  }
  const Vector p = probabilities(head, X);
  return {p.data(), p.data() + p.size()};
}

Metrics evaluate(const model::ClassifierHead& head, const std::vector<Example>& test_set, double threshold) {
  if (test_set.empty()) throw Error(ErrorKind::EmptyDataset, "empty test set");
  std::vector<int> y;
  for (const auto& e : test_set) y.push_back(e.label);
  return compute_metrics(predict(head, test_set), y, threshold);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,loss,acc,re,pre,f1\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.loss, r.metrics.accuracy,
                  r.metrics.recall, r.metrics.precision, r.metrics.f1);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------- grad check

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult grad_check(const LossFn& loss, const NamedParams& params, double epsilon, std::size_t max_params,
                           std::uint64_t seed) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in [1e-7, 1e-4]");

  std::vector<Matrix> grads(params.size());
  {
    ad::Tape tape;
    ad::Binder bind(tape);
    for (std::size_t i = 0; i < params.size(); ++i) {
      grads[i] = Matrix::Zero(params[i].second->rows(), params[i].second->cols());
      bind.set_trainable(*params[i].second, &grads[i]);
    }
    tape.backward(loss(bind));
  }
  auto eval = [&]() {
    ad::Tape tape;
    ad::Binder bind(tape);
    return loss(bind).value()(0, 0);
  };

  // Global scalar index -> (tensor, offset).
  std::vector<std::size_t> offsets{0};
  for (const auto& [_, m] : params) offsets.push_back(offsets.back() + static_cast<std::size_t>(m->size()));
  const std::size_t total = offsets.back();
  std::vector<std::size_t> chosen(total);
  std::iota(chosen.begin(), chosen.end(), 0);
  Rng rng(seed);
  const std::size_t count = std::min(max_params, total);
  for (std::size_t i = 0; i < count; ++i) std::swap(chosen[i], chosen[i + rng.below(total - i)]);
  chosen.resize(count);
  std::sort(chosen.begin(), chosen.end());

  GradCheckResult out;
  for (std::size_t g : chosen) {
    const std::size_t t = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), g) - offsets.begin()) - 1;
    const Eigen::Index local = static_cast<Eigen::Index>(g - offsets[t]);
    double& theta = params[t].second->data()[local];
    const double saved = theta;
    theta = saved + epsilon;
    const double up = eval();
    theta = saved - epsilon;
    const double down = eval();
    theta = saved;
    const double numeric = (up - down) / (2 * epsilon);
    const double analytic = grads[t].data()[local];
    const double err = relative_error(analytic, numeric);
    ++out.checked;
    if (err > out.max_rel_error || out.checked == 1) {
      out.max_rel_error = err;
      out.worst_param = params[t].first;
      out.worst_index = local;
      out.analytic = analytic;
      out.numeric = numeric;
    }
  }
  return out;
}

GradCheckResult grad_check(model::FeatureModel& features, model::ClassifierHead& head, const pipeline::Pipeline& pipe,
                           const pipeline::PreparedContract& sample, int label, double epsilon, std::size_t max_params,
                           std::uint64_t seed) {
  NamedParams params;
  auto collect = [&](const std::string& name, Matrix& m) { params.emplace_back(name, &m); };
  features.visit(collect);
  head.visit(collect);
  Vector y(1);
  y(0) = label != 0 ? 1.0 : 0.0;
  LossFn loss = [&](ad::Binder& bind) {
    ad::Var row = pipe.modalities(bind, sample, features, {});
    return ad::binary_cross_entropy(model::classify(bind, row, head, {}), y);
  };
  return grad_check(loss, params, epsilon, max_params, seed);
}

// ------------------------------------------------------------ model file

void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  model::Metadata meta = m.settings.to_metadata();
  meta["model.vulnerability"] = std::string(store::vulnerability_name(m.vulnerability));
  meta["model.mode"] = m.mode;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", m.threshold);
  meta["model.threshold"] = buf;
  auto tensors = model::named_tensors(m.features);
  for (auto& t : model::named_tensors(m.head)) tensors.push_back(t);
  model::save_tensors(path, tensors, meta);
}

TrainedModel load_model(const std::filesystem::path& path) {
  const model::TensorFile file = model::load_tensors(path);
  TrainedModel m;
  m.settings = pipeline::PipelineSettings::from_metadata(file.meta);
  m.features = pipeline::init_feature_model(m.settings);
  model::assign_tensors(m.features, file);
  const Matrix* fc = file.find("head.fc_weight");
  if (!fc) throw Error(ErrorKind::CorruptFile, path.string() + " holds no classifier head");
  m.head = model::ClassifierHead::init(fc->rows(), fc->cols(), 0);
  model::assign_tensors(m.head, file);
  auto get = [&](const std::string& key) {
    auto it = file.meta.find(key);
    if (it == file.meta.end()) throw Error(ErrorKind::CorruptFile, path.string() + " lacks metadata " + key);
    return it->second;
  };
  auto vuln = store::parse_vulnerability(get("model.vulnerability"));
  if (!vuln) throw Error(ErrorKind::CorruptFile, path.string() + ": unknown vulnerability " + get("model.vulnerability"));
  m.vulnerability = *vuln;
  m.mode = get("model.mode");
  m.threshold = std::stod(get("model.threshold"));
  return m;
}

Verdict verify(const pipeline::Pipeline& pipe, const model::ClassifierHead& head, const pipeline::PreparedContract& contract,
               store::Vulnerability vulnerability, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must lie in (0, 1)");
  Verdict v;
  v.vulnerability = vulnerability;
  v.threshold = threshold;
  v.probability = model::classify(pipe.extract(contract).flattened(), head);
  v.positive = v.probability > threshold;
  return v;
}

}  // namespace multicfv::train

#include "multicfv/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "multicfv/error.hpp"
#include "multicfv/feature_store.hpp"
#include "multicfv/random.hpp"

namespace multicfv::config {
namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::string_view label, std::size_t line, const std::string& msg) {
  throw Error(ErrorKind::ConfigError, std::string(label) + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::map<std::string, std::string> parse_ini(std::string_view text, std::string_view label) {
  std::map<std::string, std::string> out;
  std::string section;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;

    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(label, lineno, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(label, lineno, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(label, lineno, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string_view::npos) fail(label, lineno, "unterminated string");
      const std::string_view rest = trim(value.substr(close + 1));
      if (!rest.empty() && rest[0] != '#' && rest[0] != ';') fail(label, lineno, "text after quoted value");
      value = value.substr(1, close - 1);
    } else {
      const auto hash = value.find_first_of("#;");
      if (hash != std::string_view::npos) value = trim(value.substr(0, hash));
    }
    if (key.empty()) fail(label, lineno, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!out.emplace(full, std::string(value)).second) fail(label, lineno, "duplicate key " + full);
  }
  return out;
}

namespace {

template <class T>
T number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
    throw Error(ErrorKind::ConfigError, "bad numeric value for " + key + ": '" + v + "'");
  return out;
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::ConfigError, "bad boolean value for " + key + ": '" + v + "'");
}

fs::path resolve(const fs::path& base, const std::string& v) {
  fs::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value, const fs::path& base)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
#define MCFV_INDEX(key, field) \
  t[key] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = number<Eigen::Index>(k, v); }
#define MCFV_SIZE(key, field) \
  t[key] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = number<std::size_t>(k, v); }
#define MCFV_U64(key, field) \
  t[key] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = number<std::uint64_t>(k, v); }
#define MCFV_REAL(key, field) \
  t[key] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = number<double>(k, v); }
    MCFV_INDEX("pipeline.node_dim", pipeline.node_dim);
    MCFV_U64("pipeline.node_seed", pipeline.node_seed);
    MCFV_INDEX("pipeline.modality_dim", pipeline.modality_dim);
    MCFV_INDEX("pipeline.graph_hidden", pipeline.graph_hidden);
    MCFV_INDEX("pipeline.graph_fc", pipeline.graph_fc);
    MCFV_SIZE("pipeline.gru_layers", pipeline.gru_layers);
    MCFV_INDEX("pipeline.comment_embed", pipeline.comment_embed);
    MCFV_INDEX("pipeline.comment_hidden", pipeline.comment_hidden);
    MCFV_SIZE("pipeline.comment_layers", pipeline.comment_layers);
    MCFV_INDEX("pipeline.comment_kernel", pipeline.comment_kernel);
    MCFV_U64("pipeline.model_seed", pipeline.model_seed);
    MCFV_REAL("pipeline.dropout", pipeline.dropout_p);
    t["pipeline.role_pairs"] = [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path&) {
      c.pipeline.role_pairs = ast::parse_role_pairs(v);
    };
    t["pipeline.stopwords"] = [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path& base) {
      if (v == "builtin") c.pipeline.stopwords_path.reset();
      else c.pipeline.stopwords_path = resolve(base, v);
    };
    t["pipeline.train_config"] = [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path& base) {
      c.train_config_path = resolve(base, v);
    };
    t["similarity.gamma"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.gamma = number<double>(k, v);
    };
    MCFV_REAL("similarity.threshold", clone_threshold);
    MCFV_REAL("verify.threshold", verify_threshold);
    MCFV_REAL("train.lr", train.lr);
    t["train.encoder_lr"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.encoder_lr = number<double>(k, v);
    };
    MCFV_SIZE("train.epochs", train.epochs);
    MCFV_REAL("train.dropout", train.dropout_p);
    MCFV_REAL("train.split", train.split);
    MCFV_REAL("train.threshold", train.decision_threshold);
    MCFV_U64("train.seed", train.seed);
    MCFV_SIZE("train.smote_k", train.smote_k);
    MCFV_REAL("train.jitter_sigma", train.jitter_sigma);
    MCFV_SIZE("train.batch_size", train.batch_size);
    MCFV_INDEX("train.hidden_dim", train.hidden_dim);
    MCFV_REAL("train.beta1", train.beta1);
    MCFV_REAL("train.beta2", train.beta2);
    MCFV_REAL("train.adam_eps", train.adam_eps);
    t["train.balance"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      c.train.balance = boolean(k, v);
    };
    t["train.mode"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      if (v == "head") c.train_mode = TrainMode::Head;
      else if (v == "end-to-end") c.train_mode = TrainMode::EndToEnd;
      else throw Error(ErrorKind::ConfigError, k + " must be 'head' or 'end-to-end'");
    };
    t["train.vulnerability"] = [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
      auto vuln = store::parse_vulnerability(v);
      if (!vuln) throw Error(ErrorKind::ConfigError, k + ": unknown vulnerability '" + v + "'");
      c.train.vulnerability = *vuln;
    };
#undef MCFV_INDEX
#undef MCFV_SIZE
#undef MCFV_U64
#undef MCFV_REAL
    return t;
  }();
  return table;
}

void apply(PipelineConfig& cfg, const std::map<std::string, std::string>& kv, const fs::path& base, std::string_view label,
           bool train_only) {
  for (const auto& [key, value] : kv) {
    if (train_only && key.rfind("train.", 0) != 0)
      throw Error(ErrorKind::ConfigError, std::string(label) + ": only [train] keys are allowed here, found " + key);
    auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorKind::ConfigError, std::string(label) + ": unknown key " + key);
    it->second(cfg, key, value, base);
  }
}

}  // namespace

double PipelineConfig::effective_gamma() const {
  return gamma.value_or(fusion::default_gamma(pipeline.modality_dim));
}

void PipelineConfig::validate() const {
  pipeline.validate();
  train.validate();
  if (gamma && !(*gamma > 0.0 && std::isfinite(*gamma))) throw Error(ErrorKind::ConfigError, "gamma must be positive");
  if (!(clone_threshold > 0.0 && clone_threshold <= 1.0)) throw Error(ErrorKind::ConfigError, "similarity threshold must lie in (0, 1]");
  if (!(verify_threshold > 0.0 && verify_threshold < 1.0)) throw Error(ErrorKind::ConfigError, "verify threshold must lie in (0, 1)");
  if (train_config_path && !fs::exists(*train_config_path))
    throw Error(ErrorKind::ConfigError, "train config not found: " + train_config_path->string());
}

PipelineConfig parse(std::string_view text, const fs::path& base_dir, std::string_view label) {
  PipelineConfig cfg;
  apply(cfg, parse_ini(text, label), base_dir, label, false);
  if (cfg.train_config_path) {
    if (!fs::exists(*cfg.train_config_path))
      throw Error(ErrorKind::ConfigError, "train config not found: " + cfg.train_config_path->string());
    merge_train_file(cfg, *cfg.train_config_path);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "config file not found: " + path.string());
  return parse(store::read_file(path), path.parent_path(), path.string());
}

void merge_train_file(PipelineConfig& cfg, const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "train config not found: " + path.string());
  apply(cfg, parse_ini(store::read_file(path), path.string()), path.parent_path(), path.string(), true);
  cfg.train.validate();
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.pipeline.model_seed = seed;
  cfg.train.seed = seed;
}

}  // namespace multicfv::config

// multicfv: command-line front end for the contract feature pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "multicfv/cfg.hpp"
#include "multicfv/config.hpp"
#include "multicfv/disasm.hpp"
#include "multicfv/error.hpp"
#include "multicfv/feature_store.hpp"
#include "multicfv/fusion.hpp"
#include "multicfv/pipeline.hpp"
#include "multicfv/trainer.hpp"

namespace fs = std::filesystem;
using namespace multicfv;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kInternal = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

Globals g;

void info(const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

void warn(const std::string& msg) { std::cerr << msg << "\n"; }

config::PipelineConfig load_config() {
  config::PipelineConfig cfg = g.config_path.empty() ? config::PipelineConfig{} : config::load(g.config_path);
  if (g.seed) config::apply_seed(cfg, *g.seed);
  cfg.validate();
  return cfg;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    store::atomic_write(path, text);
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::string read_bytecode_arg(const std::string& arg) {
  if (fs::exists(arg)) return store::read_file(arg);
  return arg;  // literal hex
}

fs::path encoder_path(const store::FeatureStore& s) { return s.root() / "encoder.bin"; }

// The extractor a store was built with; created from config on first use.
pipeline::Pipeline store_pipeline(const store::FeatureStore& s, const config::PipelineConfig& cfg, bool create) {
  const fs::path path = encoder_path(s);
  if (fs::exists(path)) {
    pipeline::Pipeline pipe = pipeline::load_feature_model(path);
    if (!g.config_path.empty() || g.seed) {
      if (pipe.settings().to_metadata() != cfg.pipeline.to_metadata())
        throw Error(ErrorKind::ConfigError, "store " + s.root().string() +
                                                " was built with different pipeline settings; use a fresh store");
    }
    return pipe;
  }
  if (!create) throw Error(ErrorKind::ModelMissing, "store " + s.root().string() + " has no encoder.bin; run features first");
  pipeline::Pipeline pipe = pipeline::Pipeline::initialize(cfg.pipeline);
  pipeline::save_feature_model(path, pipe.settings(), pipe.model());
  return pipe;
}

// name<TAB>labels lines, labels as accepted by Labels::parse.
std::vector<std::pair<std::string, store::Labels>> read_labels(const fs::path& path) {
  std::vector<std::pair<std::string, store::Labels>> out;
  std::istringstream in(store::read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, path.string() + ":" + std::to_string(n) + ": expected name<TAB>labels");
    out.emplace_back(cfg::normalize_contract_name(line.substr(0, tab)), store::Labels::parse(line.substr(tab + 1)));
  }
  return out;
}

// ------------------------------------------------------------------ disasm

int cmd_disasm(const std::string& input) {
  const evm::Disassembly d = evm::decode_bytecode(read_bytecode_arg(input));
  std::string out;
  for (const auto& ins : d.instructions) out += evm::format_instruction(ins) + "\n";
  write_output("-", out);
  for (const auto& w : d.warnings) warn("WARN " + w);
  return kOk;
}

// --------------------------------------------------------------------- cfg

int cmd_cfg(const std::string& input, std::string name, const std::string& dot_out) {
  if (name.empty()) {
    std::string file = fs::path(input).filename().string();
    const std::string suffix = ".bin-runtime";
    if (file.size() > suffix.size() && file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0)
      file.resize(file.size() - suffix.size());
    name = fs::exists(input) ? file : "contract";
  }
  const cfg::ControlFlowGraph graph = cfg::build_cfg(read_bytecode_arg(input), cfg::normalize_contract_name(name));
  for (const auto& d : graph.diagnostics) warn(d.to_string());
  write_output(dot_out, cfg::emit_dot(graph));
  info(std::to_string(graph.blocks.size()) + " blocks, " + std::to_string(graph.edges.size()) + " edges");
  return kOk;
}

// ---------------------------------------------------------------- features

int cmd_features(const std::string& dir, const std::string& db, bool overwrite, const std::string& labels_path) {
  const config::PipelineConfig cfg = load_config();
  store::FeatureStore s = store::FeatureStore::open(db, true);
  const pipeline::Pipeline pipe = store_pipeline(s, cfg, true);

  std::map<std::string, store::Labels> labels;
  if (!labels_path.empty())
    for (auto& [n, l] : read_labels(labels_path)) labels[n] = l;

  pipeline::Discovery found = pipeline::discover_contracts(dir);
  for (const auto& d : found.diagnostics) warn(d);
  std::size_t ok = 0, failed = 0;
  for (const auto& in : found.contracts) {
    try {
      const pipeline::PreparedContract prepared = pipe.prepare(in);
      for (const auto& d : prepared.graph.diagnostics) info(prepared.name + ": " + d.to_string());
      store::StoreRecord rec;
      rec.features = pipe.extract(prepared);
      if (prepared.source_path) rec.source_path = fs::absolute(*prepared.source_path).lexically_normal().string();
      if (auto it = labels.find(prepared.name); it != labels.end()) rec.labels = it->second;
      s.put(rec, overwrite);
      ++ok;
      info("stored " + prepared.name + (rec.features.no_comments ? " (no comments)" : ""));
    } catch (const Error& e) {
      ++failed;
      warn("skip " + in.name + ": " + e.what());
    }
  }
  const std::size_t skipped = found.diagnostics.size();
  info(std::to_string(ok) + " stored, " + std::to_string(failed) + " failed");
  if (ok == 0 && (failed > 0 || skipped > 0 || found.contracts.empty())) {
    warn("no contract could be processed");
    return kInput;
  }
  return kOk;
}

// ------------------------------------------------------------------- index

int cmd_index(const std::string& db, bool rebuild, const std::string& labels_path) {
  store::FeatureStore s = store::FeatureStore::open(db, false);
  if (rebuild) info("manifest rebuilt with " + std::to_string(s.rebuild_manifest()) + " records");
  if (!labels_path.empty())
    for (auto& [name, l] : read_labels(labels_path)) s.set_labels(name, l);
  std::string out;
  for (const auto& rec : s.scan())
    out += rec.name() + "\t" + store::FeatureStore::record_file_name(rec.name()) + "\t" + rec.labels.to_string() + "\n";
  write_output("-", out);
  return kOk;
}

// ------------------------------------------------------------ clone-detect

std::string excerpt(const std::string& path, std::size_t max_lines) {
  if (path.empty() || !fs::exists(path)) return "(source unavailable)\n";
  std::istringstream in(store::read_file(path));
  std::string line, out;
  for (std::size_t n = 0; n < max_lines && std::getline(in, line); ++n) out += line + "\n";
  if (std::getline(in, line)) out += "...\n";
  return out;
}

int cmd_clone(const std::string& query, const std::string& db, std::optional<double> threshold_arg,
              const std::string& report_path, bool emit_contents, std::size_t excerpt_lines) {
  const config::PipelineConfig cfg = load_config();
  const double threshold = threshold_arg.value_or(cfg.clone_threshold);
  const store::FeatureStore s = store::FeatureStore::open(db, false);
  if (s.empty()) warn("WARN empty store " + db);

  fusion::ContractFeatures q;
  const std::string qname = cfg::normalize_contract_name(fs::path(query).filename().string());
  fs::path bin = query;
  bin.replace_extension(".bin-runtime");
  fs::path direct = query;
  direct += ".bin-runtime";
  if (fs::exists(bin) || fs::exists(direct) || fs::exists(query)) {
    const pipeline::Pipeline pipe = store_pipeline(s, cfg, false);
    q = pipe.extract(pipeline::load_contract(query));
  } else if (auto rec = s.find(qname)) {
    q = rec->features;
  } else {
    throw Error(ErrorKind::NotFound, "query " + query + " is neither a contract file nor a stored record");
  }

  const auto matches = fusion::rank_clones(q, s, threshold, cfg.effective_gamma());
  std::string csv = "rank,name,similarity,cosine,rbf\n";
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto& m = matches[i];
    csv += std::to_string(i + 1) + "," + m.contract_name + "," + format_double(m.score.value) + "," +
           format_double(m.score.cosine) + "," + format_double(m.score.rbf) + "\n";
  }
  write_output(report_path, csv);

  if (emit_contents) {
    std::string text;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const auto rec = s.get(matches[i].contract_name);
      text += "== " + std::to_string(i + 1) + " " + rec.name() + " similarity=" + format_double(matches[i].score.value) + "\n";
      text += excerpt(rec.source_path.value_or(""), excerpt_lines);
    }
    if (report_path.empty() || report_path == "-") {
      write_output("-", text);
    } else {
      fs::path contents = report_path;
      contents += ".contents.txt";
      store::atomic_write(contents, text);
    }
  }
  info(std::to_string(matches.size()) + " match(es) at threshold " + format_double(threshold));
  return kOk;
}

// ------------------------------------------------------------------ verify

int cmd_verify(const std::string& contract, const std::vector<std::string>& models, std::optional<double> threshold_arg,
               const std::string& out_path) {
  const config::PipelineConfig cfg = g.config_path.empty() && !g.seed ? config::PipelineConfig{} : load_config();
  const pipeline::ContractInputs inputs = pipeline::load_contract(contract);
  std::string report;
  for (const auto& path : models) {
    train::TrainedModel m = train::load_model(path);
    const double threshold = threshold_arg.value_or(g.config_path.empty() ? m.threshold : cfg.verify_threshold);
    const pipeline::Pipeline pipe(m.settings, m.features);
    const pipeline::PreparedContract prepared = pipe.prepare(inputs);
    const train::Verdict v = train::verify(pipe, m.head, prepared, m.vulnerability, threshold);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v.probability);
    report += "[verdict]\ncontract = " + prepared.name + "\nmodel = " + fs::path(path).filename().string() +
              "\nvulnerability = " + std::string(store::vulnerability_name(v.vulnerability)) + "\nprobability = " + buf +
              "\nthreshold = " + format_double(v.threshold) + "\nverdict = " + (v.positive ? "positive" : "negative") +
              "\n\n";
  }
  write_output(out_path, report);
  return kOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const std::string& db, const std::string& vuln_name, const std::string& train_cfg, const std::string& out,
              const std::string& history_path, const std::string& mode_arg, const std::string& contracts_dir,
              std::optional<std::size_t> epochs, std::optional<double> lr) {
  config::PipelineConfig cfg = load_config();
  if (!train_cfg.empty()) config::merge_train_file(cfg, train_cfg);
  if (g.seed) cfg.train.seed = *g.seed;
  auto vuln = store::parse_vulnerability(vuln_name);
  if (!vuln) throw Error(ErrorKind::InvalidArgument, "unknown vulnerability '" + vuln_name + "'");
  cfg.train.vulnerability = *vuln;
  if (epochs) cfg.train.epochs = *epochs;
  if (lr) cfg.train.lr = *lr;
  if (!mode_arg.empty()) {
    if (mode_arg == "head") cfg.train_mode = config::TrainMode::Head;
    else if (mode_arg == "end-to-end") cfg.train_mode = config::TrainMode::EndToEnd;
    else throw Error(ErrorKind::InvalidArgument, "--mode must be head or end-to-end");
  }
  cfg.train.validate();

  const store::FeatureStore s = store::FeatureStore::open(db, false);
  const pipeline::Pipeline pipe = store_pipeline(s, cfg, false);

  train::TrainedModel m;
  m.settings = pipe.settings();
  m.vulnerability = *vuln;
  m.threshold = cfg.train.decision_threshold;
  train::TrainResult result;
  if (cfg.train_mode == config::TrainMode::Head) {
    std::vector<train::Example> data;
    for (const auto& rec : s.scan())
      if (auto l = rec.labels[*vuln]) data.push_back({rec.name(), rec.features.flattened(), *l ? 1 : 0});
    if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no record in " + db + " is labelled for " + vuln_name);
    info("training head on " + std::to_string(data.size()) + " labelled records");
    result = train::train(data, cfg.train);
    m.features = pipe.model();
    m.mode = "head";
  } else {
    if (contracts_dir.empty()) throw Error(ErrorKind::InvalidArgument, "--contracts is required in end-to-end mode");
    pipeline::Discovery found = pipeline::discover_contracts(contracts_dir);
    for (const auto& d : found.diagnostics) warn(d);
    std::vector<pipeline::PreparedContract> prepared;
    std::vector<int> labels;
    for (const auto& in : found.contracts) {
      const auto rec = s.find(cfg::normalize_contract_name(in.name));
      if (!rec || !rec->labels[*vuln]) continue;
      prepared.push_back(pipe.prepare(in));
      labels.push_back(*rec->labels[*vuln] ? 1 : 0);
    }
    if (prepared.empty()) throw Error(ErrorKind::EmptyDataset, "no labelled contract found in " + contracts_dir);
    info("training end-to-end on " + std::to_string(prepared.size()) + " contracts");
    result = train::train_end_to_end(pipe, prepared, labels, cfg.train);
    m.features = *result.features;
    m.mode = "end-to-end";
  }
  m.head = result.head;
  train::save_model(out, m);
  if (!history_path.empty()) store::atomic_write(history_path, train::history_csv(result.history));

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "best_epoch = %zu\nbest_loss = %.9f\ntest_acc = %.6f\ntest_re = %.6f\ntest_pre = %.6f\ntest_f1 = %.6f\n"
                "test_auc = %.6f\n",
                result.best_epoch, result.best_loss, result.test_metrics.accuracy, result.test_metrics.recall,
                result.test_metrics.precision, result.test_metrics.f1, result.test_metrics.auc);
  write_output("-", buf);
  return kOk;
}

// ---------------------------------------------------------------- keywords

int cmd_keywords(const std::string& input, const std::string& db, const std::string& table_path) {
  const config::PipelineConfig cfg = load_config();
  std::optional<pipeline::Pipeline> pipe;
  if (!db.empty()) pipe.emplace(store_pipeline(store::FeatureStore::open(db, false), cfg, false));
  else pipe.emplace(pipeline::Pipeline::initialize(cfg.pipeline));

  std::vector<pipeline::ContractInputs> inputs;
  if (fs::is_directory(input)) {
    pipeline::Discovery found = pipeline::discover_contracts(input);
    for (const auto& d : found.diagnostics) warn(d);
    inputs = std::move(found.contracts);
  } else {
    inputs.push_back(pipeline::load_contract(input));
  }
  std::vector<comments::KeywordReport> reports;
  std::string out;
  for (const auto& in : inputs) {
    const pipeline::PreparedContract prepared = pipe->prepare(in);
    comments::KeywordReport r = pipe->keywords(prepared);
    out += prepared.name + " k=" + std::to_string(r.k) + ":";
    for (const auto& e : r.ranked) out += " " + e.token + "(" + format_double(e.weight) + ")";
    out += "\n";
    reports.push_back(std::move(r));
  }
  write_output("-", out);
  if (!table_path.empty()) write_output(table_path, comments::keyword_frequency_table(reports));
  return kOk;
}

// -------------------------------------------------------------- grad-check

int cmd_grad_check(const std::string& contract, double epsilon, std::size_t params, double tolerance) {
  config::PipelineConfig cfg = load_config();
  if (g.config_path.empty()) {
    // Tiny dimensions keep the finite-difference sweep fast.
    auto& p = cfg.pipeline;
    p.node_dim = 16;
    p.modality_dim = 6;
    p.graph_hidden = 5;
    p.graph_fc = 4;
    p.comment_embed = 16;
    p.comment_hidden = 5;
    p.comment_layers = 2;
  }
  const pipeline::Pipeline pipe = pipeline::Pipeline::initialize(cfg.pipeline);
  const pipeline::PreparedContract prepared = pipe.prepare(pipeline::load_contract(contract));
  model::FeatureModel features = pipe.model();
  model::ClassifierHead head = model::ClassifierHead::init(3 * cfg.pipeline.modality_dim, 4, cfg.train.seed);
  const train::GradCheckResult r =
      train::grad_check(features, head, pipe, prepared, 1, epsilon, params, cfg.train.seed);
  char buf[256];
  std::snprintf(buf, sizeof buf, "checked = %zu\nmax_rel_error = %.6e\nworst = %s[%ld]\nanalytic = %.12e\nnumeric = %.12e\n",
                r.checked, r.max_rel_error, r.worst_param.c_str(), static_cast<long>(r.worst_index), r.analytic,
                r.numeric);
  write_output("-", buf);
  return r.max_rel_error < tolerance ? kOk : kInternal;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
      return kInternal;
    default:
      return kInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multicfv: multimodal smart-contract clone detection and vulnerability verification"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "Pipeline config file (key = value with [sections])")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override every seed in the config");
  app.add_flag("--quiet,-q", g.quiet, "Suppress progress messages");

  std::string input, name, out, db, labels, report, query, model_out, history, mode, contracts_dir, table, train_cfg, vuln;
  std::vector<std::string> models;
  bool overwrite = false, rebuild = false, emit_contents = false;
  std::optional<double> threshold, lr;
  std::optional<std::size_t> epochs;
  std::size_t excerpt_lines = 40, params = 200;
  double epsilon = 3e-5, tolerance = 1e-4;

  auto* disasm = app.add_subcommand("disasm", "Disassemble runtime bytecode");
  disasm->add_option("input", input, "Bytecode file or hex literal")->required();

  auto* cfgc = app.add_subcommand("cfg", "Build the typed control flow graph and emit DOT");
  cfgc->add_option("input", input, "Bytecode file or hex literal")->required();
  cfgc->add_option("--name", name, "Contract name used in the graph");
  cfgc->add_option("--dot,-o", out, "Output DOT file (default stdout)");

  auto* features = app.add_subcommand("features", "Extract features for every contract trio in a directory");
  features->add_option("dir", input, "Directory of <name>.sol/.bin-runtime/.ast.json files")->required()->check(CLI::ExistingDirectory);
  features->add_option("--db", db, "Feature store directory")->required();
  features->add_option("--labels", labels, "Label file: name<TAB>reentrancy=1,...")->check(CLI::ExistingFile);
  features->add_flag("--overwrite", overwrite, "Replace existing records");

  auto* index = app.add_subcommand("index", "List, relabel or rebuild a feature store");
  index->add_option("--db", db, "Feature store directory")->required();
  index->add_flag("--rebuild", rebuild, "Rebuild the manifest from record files");
  index->add_option("--labels", labels, "Label file: name<TAB>reentrancy=1,...")->check(CLI::ExistingFile);

  auto* clone = app.add_subcommand("clone-detect", "Rank stored contracts by similarity to a query");
  clone->add_option("--query", query, "Query contract (any member of its trio) or stored name")->required();
  clone->add_option("--db", db, "Feature store directory")->required();
  clone->add_option("--threshold", threshold, "Similarity threshold in (0, 1]");
  clone->add_option("--report", report, "CSV report path (default stdout)");
  clone->add_flag("--emit-contents", emit_contents, "Also write matched source excerpts");
  clone->add_option("--excerpt-lines", excerpt_lines, "Lines per excerpt");

  auto* verify = app.add_subcommand("verify", "Score a contract with trained vulnerability models");
  verify->add_option("--contract", input, "Contract (any member of its trio)")->required();
  verify->add_option("--model", models, "Trained model file; repeatable")->required();
  verify->add_option("--threshold", threshold, "Decision threshold in (0, 1)");
  verify->add_option("--out", out, "Report path (default stdout)");

  auto* trainc = app.add_subcommand("train", "Train a per-vulnerability classifier");
  trainc->add_option("--db", db, "Feature store directory")->required();
  trainc->add_option("--vuln", vuln, "reentrancy | access_control | external_call | delegatecall")->required();
  trainc->add_option("--config", train_cfg, "File with [train] settings")->check(CLI::ExistingFile);
  trainc->add_option("--out", model_out, "Model file to write")->required();
  trainc->add_option("--history", history, "Per-epoch metrics CSV");
  trainc->add_option("--mode", mode, "head | end-to-end");
  trainc->add_option("--contracts", contracts_dir, "Contract directory (end-to-end mode)");
  trainc->add_option("--epochs", epochs, "Override epoch count");
  trainc->add_option("--lr", lr, "Override learning rate");

  auto* keywords = app.add_subcommand("keywords", "Rank comment keywords by attention mass");
  keywords->add_option("input", input, "Contract or directory")->required();
  keywords->add_option("--db", db, "Use the extractor stored in this feature store");
  keywords->add_option("--table", table, "Corpus keyword frequency CSV");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of the differentiable pipeline");
  gc->add_option("--contract", input, "Contract (any member of its trio)")->required();
  gc->add_option("--epsilon", epsilon, "Central difference step in [1e-7, 1e-4]");
  gc->add_option("--params", params, "Number of sampled parameters");
  gc->add_option("--tolerance", tolerance, "Maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*disasm) return cmd_disasm(input);
    if (*cfgc) return cmd_cfg(input, name, out);
    if (*features) return cmd_features(input, db, overwrite, labels);
    if (*index) return cmd_index(db, rebuild, labels);
    if (*clone) return cmd_clone(query, db, threshold, report, emit_contents, excerpt_lines);
    if (*verify) return cmd_verify(input, models, threshold, out);
    if (*trainc) return cmd_train(db, vuln, train_cfg, model_out, history, mode, contracts_dir, epochs, lr);
    if (*keywords) return cmd_keywords(input, db, table);
    if (*gc) return cmd_grad_check(input, epsilon, params, tolerance);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

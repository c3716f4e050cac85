#include <gtest/gtest.h>

#include <cstring>

#include "helpers.hpp"
#include "multicfv/error.hpp"
#include "multicfv/pipeline.hpp"

using namespace multicfv;
using namespace multicfv::pipeline;
using testing_support::corpus_dir;
using testing_support::TempDir;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void copy_corpus(const std::filesystem::path& to) {
  std::filesystem::create_directories(to);
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir())) std::filesystem::copy_file(e.path(), to / e.path().filename());
}

}  // namespace

TEST(Discovery, FindsCorpusInNameOrder) {
  const auto d = discover_contracts(corpus_dir());
  std::vector<std::string> names;
  for (const auto& c : d.contracts) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"Registry.sol", "Token.sol", "TokenClone.sol", "Vault.sol", "Wallet.sol"}));
  EXPECT_TRUE(d.diagnostics.empty());
  for (const auto& c : d.contracts) {
    EXPECT_TRUE(c.source.has_value());
    EXPECT_FALSE(c.bytecode_hex.empty());
  }
}

TEST(Discovery, MissingAstIsSkippedWithDiagnostic) {
  TempDir dir;
  copy_corpus(dir / "c");
  std::filesystem::remove(dir / "c" / "Vault.ast.json");
  std::filesystem::remove(dir / "c" / "Wallet.sol");
  const auto d = discover_contracts(dir / "c");
  ASSERT_EQ(d.contracts.size(), 4u);
  for (const auto& c : d.contracts) EXPECT_NE(c.name, "Vault.sol");
  bool skip = false, note = false;
  for (const auto& msg : d.diagnostics) {
    if (msg.find("skip Vault.sol") != std::string::npos && msg.find("ast") != std::string::npos) skip = true;
    if (msg.find("Wallet.sol") != std::string::npos) note = true;
  }
  EXPECT_TRUE(skip);
  EXPECT_TRUE(note);
  try {
    load_contract(dir / "c" / "Vault.sol");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFound);
  }
  const auto w = load_contract(dir / "c" / "Wallet.bin-runtime");
  EXPECT_EQ(w.name, "Wallet.sol");
  EXPECT_FALSE(w.source);
}

TEST(Settings, DefaultsAndValidation) {
  PipelineSettings s;
  EXPECT_EQ(s.node_dim, 128u);
  EXPECT_EQ(s.modality_dim, 512);
  EXPECT_EQ(s.gru_layers, 3u);
  EXPECT_EQ(s.comment_layers, 4u);
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.ast_raw_dim(), 35 + 20 + 5 + 3);
  auto bad = s;
  bad.node_dim = 8;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.dropout_p = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Settings, MetadataRoundTrip) {
  PipelineSettings s = testing_support::tiny_settings();
  s.dropout_p = 0.1;
  s.role_pairs.resize(3);
  s.stopwords_path = "/tmp/sw.txt";
  const auto back = PipelineSettings::from_metadata(s.to_metadata());
  EXPECT_EQ(back.to_metadata(), s.to_metadata());
  EXPECT_EQ(back.dropout_p, 0.1);
  EXPECT_EQ(back.role_pairs, s.role_pairs);
  EXPECT_THROW(PipelineSettings::from_metadata({}), Error);
}

TEST(Pipeline, ExtractShapesFlagsAndDeterminism) {
  const auto settings = testing_support::tiny_settings();
  const Pipeline a = Pipeline::initialize(settings), b = Pipeline::initialize(settings);
  for (const auto& c : discover_contracts(corpus_dir()).contracts) {
    const auto fa = a.extract(c), fb = b.extract(c);
    EXPECT_EQ(fa.contract_name, c.name);
    EXPECT_EQ(fa.F.rows(), 3);
    EXPECT_EQ(fa.F.cols(), 6);
    EXPECT_TRUE(fa.F.allFinite());
    EXPECT_TRUE(bitwise_equal(fa.F, fb.F));
    EXPECT_EQ(fa.no_comments, c.name == "Registry.sol") << c.name;
    if (fa.no_comments) EXPECT_TRUE(fa.F.row(2).isZero());
  }
}

TEST(Pipeline, TapeModalitiesMatchExtract) {
  const Pipeline p = Pipeline::initialize(testing_support::tiny_settings());
  const auto prepared = p.prepare(load_contract(corpus_dir() / "Vault.sol"));
  ad::Tape tape;
  ad::Binder bind(tape);
  const Matrix row = p.modalities(bind, prepared, p.model(), encoder::Dropout{0.3, nullptr}).value();
  const Vector flat = p.extract(prepared).flattened();
  ASSERT_EQ(row.cols(), flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) EXPECT_DOUBLE_EQ(row(0, i), flat(i));
}

TEST(Pipeline, PrepareRejectsEmptyBytecode) {
  const Pipeline p = Pipeline::initialize(testing_support::tiny_settings());
  ContractInputs in = load_contract(corpus_dir() / "Token.sol");
  in.bytecode_hex = "";
  try {
    p.prepare(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
  in.bytecode_hex = "zz";
  EXPECT_THROW(p.prepare(in), Error);
}

TEST(Pipeline, CloneScoresAboveNonClones) {
  const Pipeline p = Pipeline::initialize(PipelineSettings{});
  const auto token = p.extract(load_contract(corpus_dir() / "Token.sol"));
  const auto clone = p.extract(load_contract(corpus_dir() / "TokenClone.sol"));
  const auto vault = p.extract(load_contract(corpus_dir() / "Vault.sol"));
  const double g = fusion::default_gamma();
  EXPECT_GE(fusion::similarity(token, clone, g).value, 0.95);
  EXPECT_LT(fusion::similarity(token, vault, g).value, fusion::similarity(token, clone, g).value);
}

TEST(Pipeline, SaveLoadFeatureModelPreservesExtraction) {
  TempDir dir;
  const auto settings = testing_support::tiny_settings();
  const Pipeline p = Pipeline::initialize(settings);
  save_feature_model(dir / "enc.bin", settings, p.model());
  const Pipeline q = load_feature_model(dir / "enc.bin");
  EXPECT_EQ(q.settings().to_metadata(), settings.to_metadata());
  const auto c = load_contract(corpus_dir() / "Wallet.sol");
  EXPECT_TRUE(bitwise_equal(p.extract(c).F, q.extract(c).F));
  try {
    load_feature_model(dir / "nope.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelMissing);
  }
}

TEST(Pipeline, KeywordsComeFromComments) {
  const Pipeline p = Pipeline::initialize(testing_support::tiny_settings());
  const auto rep = p.keywords(p.prepare(load_contract(corpus_dir() / "Vault.sol")));
  EXPECT_EQ(rep.contract_name, "Vault.sol");
  EXPECT_FALSE(rep.ranked.empty());
  EXPECT_TRUE(p.keywords(p.prepare(load_contract(corpus_dir() / "Registry.sol"))).ranked.empty());
}

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "cli_runner.hpp"
#include "helpers.hpp"
#include "multicfv/feature_store.hpp"

namespace fs = std::filesystem;
using testing_support::corpus_dir;
using testing_support::fixture_dir;
using testing_support::run_cli;
using testing_support::slurp;
using testing_support::TempDir;

namespace {

std::map<std::string, std::string> directory_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// cos * exp(-gamma |a-b|^2) over the flattened stacks, in long double.
long double oracle_similarity(const multicfv::Vector& a, const multicfv::Vector& b) {
  long double dot = 0, na = 0, nb = 0, d2 = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a(i)) * b(i);
    na += static_cast<long double>(a(i)) * a(i);
    nb += static_cast<long double>(b(i)) * b(i);
    const long double d = static_cast<long double>(a(i)) - b(i);
    d2 += d * d;
  }
  const long double cos = (na == 0 || nb == 0) ? 0.0L : dot / std::sqrt(na * nb);
  return cos * std::exp(-d2 / static_cast<long double>(a.size()));
}

class CliStore : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = run_cli({"-q", "features", corpus_dir().string(), "--db", store().string(), "--labels",
                            (fixture_dir() / "labels.tsv").string()},
                           tmp_.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  fs::path store() const { return tmp_ / "db"; }
  TempDir tmp_{"cli"};
};

}  // namespace

TEST(CliExitCodes, UsageErrorsReturnOne) {
  TempDir t;
  EXPECT_EQ(run_cli({}, t.path()).exit_code, 1);
  EXPECT_EQ(run_cli({"no-such-command"}, t.path()).exit_code, 1);
  EXPECT_EQ(run_cli({"disasm"}, t.path()).exit_code, 1);
  EXPECT_EQ(run_cli({"clone-detect", "--db", t.path().string()}, t.path()).exit_code, 1);
}

TEST(CliExitCodes, InputErrorsReturnTwo) {
  TempDir t;
  const auto bad_hex = run_cli({"disasm", "6001zz"}, t.path());
  EXPECT_EQ(bad_hex.exit_code, 2);
  EXPECT_NE(bad_hex.err.find("NonHexInput"), std::string::npos);
  const auto missing = run_cli({"verify", "--contract", (corpus_dir() / "Vault.sol").string(), "--model",
                                (t / "absent.bin").string()},
                               t.path());
  EXPECT_EQ(missing.exit_code, 2);
  EXPECT_NE(missing.err.find("ModelMissing"), std::string::npos);
  EXPECT_EQ(run_cli({"index", "--db", (t / "nothing").string()}, t.path()).exit_code, 2);
}

TEST(CliExitCodes, FailedInvariantReturnsThree) {
  TempDir t;
  const auto r = run_cli({"-q", "grad-check", "--contract", (corpus_dir() / "Vault.sol").string(), "--params", "20",
                          "--tolerance", "1e-300"},
                         t.path());
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.out.find("max_rel_error"), std::string::npos);
}

TEST(CliDisasm, PrintsOneLinePerInstructionDeterministically) {
  TempDir t;
  const auto a = run_cli({"disasm", "0x6001600201"}, t.path());
  ASSERT_EQ(a.exit_code, 0) << a.err;
  const auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_NE(ls[0].find("PUSH1"), std::string::npos);
  EXPECT_NE(ls[2].find("ADD"), std::string::npos);
  EXPECT_EQ(run_cli({"disasm", "0x6001600201"}, t.path()).out, a.out);
}

TEST(CliCfg, WritesDotFile) {
  TempDir t;
  const auto r = run_cli({"-q", "cfg", (corpus_dir() / "Vault.bin-runtime").string(), "-o", (t / "g.dot").string()},
                         t.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string dot = slurp(t / "g.dot");
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_NE(dot.find("Vault"), std::string::npos);
}

TEST(CliFeatures, OneRecordPerCompleteTrio) {
  TempDir t;
  const auto r = run_cli({"-q", "features", corpus_dir().string(), "--db", (t / "db").string()}, t.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto s = multicfv::store::FeatureStore::open(t / "db", false);
  EXPECT_EQ(s.scan().size(), 5u);
}

TEST(CliFeatures, MissingAstIsSkippedWithDiagnostic) {
  TempDir t;
  fs::create_directories(t / "in");
  for (const char* f : {"Vault.sol", "Vault.bin-runtime", "Token.sol", "Token.bin-runtime", "Token.ast.json"})
    fs::copy_file(corpus_dir() / f, t / "in" / f);
  const auto r = run_cli({"-q", "features", (t / "in").string(), "--db", (t / "db").string()}, t.path());
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("Vault"), std::string::npos);
  EXPECT_NE(r.err.find("ast.json"), std::string::npos);
  const auto recs = multicfv::store::FeatureStore::open(t / "db", false).scan();
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].name(), "Token.sol");
}

TEST(CliFeatures, AllInputsFailingIsAnInputError) {
  TempDir t;
  fs::create_directories(t / "in");
  fs::copy_file(corpus_dir() / "Vault.bin-runtime", t / "in" / "Vault.bin-runtime");
  const auto r = run_cli({"-q", "features", (t / "in").string(), "--db", (t / "db").string()}, t.path());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(CliFeatures, RerunProducesBitIdenticalStores) {
  TempDir t;
  for (const char* db : {"a", "b"})
    ASSERT_EQ(run_cli({"-q", "features", corpus_dir().string(), "--db", (t / db).string()}, t.path()).exit_code, 0);
  const auto a = directory_bytes(t / "a");
  const auto b = directory_bytes(t / "b");
  EXPECT_GE(a.size(), 7u);
  EXPECT_EQ(a, b);
}

TEST(CliFeatures, SeedOverrideChangesFeatures) {
  TempDir t;
  ASSERT_EQ(run_cli({"-q", "features", corpus_dir().string(), "--db", (t / "a").string()}, t.path()).exit_code, 0);
  ASSERT_EQ(run_cli({"-q", "--seed", "7", "features", corpus_dir().string(), "--db", (t / "b").string()}, t.path())
                .exit_code,
            0);
  const auto a = multicfv::store::FeatureStore::open(t / "a", false).get("Vault.sol");
  const auto b = multicfv::store::FeatureStore::open(t / "b", false).get("Vault.sol");
  EXPECT_NE(a.features.flattened(), b.features.flattened());
}

TEST_F(CliStore, IndexListsLabels) {
  const auto r = run_cli({"index", "--db", store().string()}, tmp_.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[3].substr(0, ls[3].find('\t')), "Vault.sol");
  EXPECT_NE(ls[3].find("reentrancy=1"), std::string::npos);
}

TEST_F(CliStore, CloneReportRowsMatchOracleCount) {
  const auto s = multicfv::store::FeatureStore::open(store(), false);
  const auto query = s.get("Vault.sol").features.flattened();
  for (double threshold : {0.05, 0.5, 0.9, 0.999, 1.0}) {
    std::size_t expected = 0;
    for (const auto& rec : s.scan())
      if (oracle_similarity(query, rec.features.flattened()) >= threshold - 1e-12) ++expected;
    std::ostringstream th;
    th << threshold;
    const auto r =
        run_cli({"-q", "clone-detect", "--query", "Vault", "--db", store().string(), "--threshold", th.str()}, tmp_.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto ls = lines(r.out);
    ASSERT_FALSE(ls.empty());
    EXPECT_EQ(ls[0], "rank,name,similarity,cosine,rbf");
    EXPECT_EQ(ls.size() - 1, expected) << "threshold " << threshold;
  }
}

TEST_F(CliStore, SelfQueryAtOneReturnsItself) {
  const auto r = run_cli({"-q", "clone-detect", "--query", (corpus_dir() / "Wallet.sol").string(), "--db",
                          store().string(), "--threshold", "1.0"},
                         tmp_.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_GE(ls.size(), 2u);
  EXPECT_EQ(ls[1].rfind("1,Wallet.sol,1.000000000", 0), 0u);
}

TEST_F(CliStore, CloneReportAndContentsFiles) {
  const fs::path report = tmp_ / "report.csv";
  const auto r = run_cli({"-q", "clone-detect", "--query", (corpus_dir() / "TokenClone.sol").string(), "--db",
                          store().string(), "--report", report.string(), "--emit-contents", "--excerpt-lines", "3"},
                         tmp_.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto ls = lines(slurp(report));
  ASSERT_GE(ls.size(), 3u);
  EXPECT_EQ(ls[1].substr(0, 16), "1,TokenClone.sol");
  EXPECT_EQ(ls[2].substr(0, 11), "2,Token.sol");
  const std::string contents = slurp(report.string() + ".contents.txt");
  EXPECT_NE(contents.find("== 1 TokenClone.sol similarity="), std::string::npos);
  EXPECT_NE(contents.find("pragma solidity"), std::string::npos);
}

TEST_F(CliStore, EmptyStoreWarnsAndReportsNothing) {
  const fs::path empty = tmp_ / "empty";
  ASSERT_EQ(run_cli({"-q", "features", (tmp_ / "db").string(), "--db", empty.string()}, tmp_.path()).exit_code, 2);
  const auto r = run_cli({"-q", "clone-detect", "--query", (corpus_dir() / "Vault.sol").string(), "--db",
                              empty.string()},
                             tmp_.path());
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("empty store"), std::string::npos);
  EXPECT_EQ(lines(r.out).size(), 1u);
}

TEST_F(CliStore, TrainThenVerifyIsDeterministic) {
  const fs::path model = tmp_ / "ac.bin";
  const fs::path history = tmp_ / "h.csv";
  const auto t = run_cli({"-q", "train", "--db", store().string(), "--vuln", "access_control", "--out", model.string(),
                          "--epochs", "5", "--history", history.string()},
                         tmp_.path());
  ASSERT_EQ(t.exit_code, 0) << t.err;
  EXPECT_NE(t.out.find("best_epoch = "), std::string::npos);
  const auto hist = lines(slurp(history));
  ASSERT_EQ(hist.size(), 6u);
  EXPECT_EQ(hist[0], "epoch,loss,acc,re,pre,f1");

  const std::vector<std::string> args = {"-q", "verify", "--contract", (corpus_dir() / "Wallet.sol").string(), "--model",
                                         model.string()};
  const auto a = run_cli(args, tmp_.path());
  const auto b = run_cli(args, tmp_.path());
  ASSERT_EQ(a.exit_code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto ls = lines(a.out);
  ASSERT_GE(ls.size(), 7u);
  EXPECT_EQ(ls[0], "[verdict]");
  EXPECT_EQ(ls[1], "contract = Wallet.sol");
  EXPECT_EQ(ls[3], "vulnerability = access_control");
  EXPECT_EQ(ls[4].rfind("probability = ", 0), 0u);
  EXPECT_EQ(ls[5], "threshold = 0.950000000");
  const double p = std::stod(ls[4].substr(14));
  EXPECT_EQ(ls[6], std::string("verdict = ") + (p > 0.95 ? "positive" : "negative"));

  // A threshold above p flips the verdict.
  const auto at = run_cli({"-q", "verify", "--contract", (corpus_dir() / "Wallet.sol").string(), "--model",
                           model.string(), "--threshold", "0.999999999"},
                          tmp_.path());
  ASSERT_EQ(at.exit_code, 0) << at.err;
  EXPECT_NE(at.out.find("verdict = negative"), std::string::npos);
}

TEST_F(CliStore, UnknownVulnerabilityIsInputError) {
  const auto r = run_cli({"-q", "train", "--db", store().string(), "--vuln", "overflow", "--out",
                          (tmp_ / "m.bin").string()},
                         tmp_.path());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(CliKeywords, RanksCommentTokens) {
  TempDir t;
  const auto r = run_cli({"-q", "keywords", (corpus_dir() / "Vault.sol").string()}, t.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Vault.sol k=", 0), 0u);
  EXPECT_EQ(run_cli({"-q", "keywords", (corpus_dir() / "Vault.sol").string()}, t.path()).out, r.out);
}

#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "multicfv/config.hpp"
#include "multicfv/error.hpp"

using namespace multicfv;
using namespace multicfv::config;
using testing_support::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Ini, SectionsCommentsAndQuotes) {
  const auto m = parse_ini("# top\n[a]\nx = 1 ; trailing\n y=\"two # words\"\n\n[b]\nx=3\n");
  EXPECT_EQ(m.at("a.x"), "1");
  EXPECT_EQ(m.at("a.y"), "two # words");
  EXPECT_EQ(m.at("b.x"), "3");
  EXPECT_EQ(m.size(), 3u);
}

TEST(Ini, ErrorsNameTheLine) {
  try {
    parse_ini("[a]\nx=1\nnot a pair\n", "cfg.ini");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("cfg.ini:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_ini("[a]\nx=1\nx=2\n"), Error);
  EXPECT_THROW(parse_ini("[a\nx=1\n"), Error);
  EXPECT_THROW(parse_ini("[a]\nx=\"open\n"), Error);
}

TEST(Config, DefaultsWhenEmpty) {
  const auto c = parse("");
  EXPECT_EQ(c.clone_threshold, 0.95);
  EXPECT_EQ(c.verify_threshold, 0.95);
  EXPECT_EQ(c.train_mode, TrainMode::Head);
  EXPECT_DOUBLE_EQ(c.effective_gamma(), 1.0 / 1536);
  EXPECT_EQ(c.train.epochs, 500u);
  EXPECT_EQ(c.train.lr, 0.005);
}

TEST(Config, EveryKnownKey) {
  const auto c = parse(R"([pipeline]
node_dim = 256
node_seed = 9
modality_dim = 64
graph_hidden = 32
graph_fc = 16
gru_layers = 2
comment_embed = 32
comment_hidden = 24
comment_layers = 3
comment_kernel = 5
model_seed = 77
dropout = 0.25
role_pairs = "IfStatement>FunctionCall,Block>IfStatement"
stopwords = builtin
[similarity]
gamma = 0.002
threshold = 1
[verify]
threshold = 0.9
[train]
lr = 0.01
encoder_lr = 0.001
epochs = 12
dropout = 0.2
split = 0.75
threshold = 0.8
seed = 5
smote_k = 3
jitter_sigma = 0
batch_size = 8
hidden_dim = 64
beta1 = 0.8
beta2 = 0.99
adam_eps = 1e-7
balance = false
mode = end-to-end
vulnerability = delegatecall
)");
  EXPECT_EQ(c.pipeline.node_dim, 256u);
  EXPECT_EQ(c.pipeline.node_seed, 9u);
  EXPECT_EQ(c.pipeline.modality_dim, 64);
  EXPECT_EQ(c.pipeline.comment_kernel, 5);
  EXPECT_EQ(c.pipeline.model_seed, 77u);
  EXPECT_EQ(c.pipeline.dropout_p, 0.25);
  EXPECT_EQ(c.pipeline.role_pairs.size(), 2u);
  EXPECT_FALSE(c.pipeline.stopwords_path);
  EXPECT_EQ(c.gamma, 0.002);
  EXPECT_EQ(c.clone_threshold, 1.0);
  EXPECT_EQ(c.verify_threshold, 0.9);
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.encoder_lr, 0.001);
  EXPECT_EQ(c.train.epochs, 12u);
  EXPECT_EQ(c.train.split, 0.75);
  EXPECT_EQ(c.train.decision_threshold, 0.8);
  EXPECT_EQ(c.train.smote_k, 3u);
  EXPECT_EQ(c.train.jitter_sigma, 0.0);
  EXPECT_EQ(c.train.batch_size, 8u);
  EXPECT_EQ(c.train.hidden_dim, 64);
  EXPECT_EQ(c.train.adam_eps, 1e-7);
  EXPECT_FALSE(c.train.balance);
  EXPECT_EQ(c.train_mode, TrainMode::EndToEnd);
  EXPECT_EQ(c.train.vulnerability, store::Vulnerability::Delegatecall);
}

TEST(Config, RejectsUnknownAndInvalidValues) {
  EXPECT_EQ(kind_of([] { parse("[pipeline]\nnode_dims = 3\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[nonsense]\nx = 3\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[train]\nepochs = ten\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[train]\nepochs = -1\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[train]\nmode = sideways\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[train]\nbalance = maybe\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[similarity]\nthreshold = 0\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[similarity]\ngamma = -1\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[pipeline]\ncomment_kernel = 4\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[pipeline]\nrole_pairs = Foo>Bar\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse("[train]\nsplit = 1.5\n"); }), ErrorKind::ConfigError);
}

TEST(Config, RelativePathsAndFiles) {
  TempDir dir;
  std::filesystem::create_directories(dir / "conf");
  write(dir / "conf" / "words.txt", "alpha\n");
  write(dir / "conf" / "train.ini", "[train]\nepochs = 3\nlr = 0.5\n");
  write(dir / "conf" / "main.ini", "[pipeline]\nstopwords = words.txt\ntrain_config = train.ini\n[train]\nepochs=9\n");
  const auto c = load(dir / "conf" / "main.ini");
  ASSERT_TRUE(c.pipeline.stopwords_path);
  EXPECT_EQ(std::filesystem::weakly_canonical(*c.pipeline.stopwords_path),
            std::filesystem::weakly_canonical(dir / "conf" / "words.txt"));
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train.lr, 0.5);
  EXPECT_EQ(kind_of([&] { load(dir / "conf" / "absent.ini"); }), ErrorKind::ConfigError);
  write(dir / "conf" / "dangling.ini", "[pipeline]\ntrain_config = gone.ini\n");
  EXPECT_EQ(kind_of([&] { load(dir / "conf" / "dangling.ini"); }), ErrorKind::ConfigError);
  write(dir / "conf" / "sneaky.ini", "[pipeline]\nnode_dim = 64\n");
  auto base = parse("");
  EXPECT_EQ(kind_of([&] { merge_train_file(base, dir / "conf" / "sneaky.ini"); }), ErrorKind::ConfigError);
}

TEST(Config, SeedOverride) {
  auto c = parse("");
  apply_seed(c, 1234);
  EXPECT_EQ(c.pipeline.model_seed, 1234u);
  EXPECT_EQ(c.train.seed, 1234u);
}

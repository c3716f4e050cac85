#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "multicfv/cfg.hpp"
#include "multicfv/disasm.hpp"
#include "multicfv/embedding.hpp"
#include "multicfv/fusion.hpp"
#include "multicfv/graph_encoder.hpp"
#include "multicfv/random.hpp"

using namespace multicfv;

namespace {

// Random-ish bytecode: mostly arithmetic with a JUMPDEST/JUMPI pattern every 32 bytes.
std::vector<std::uint8_t> synthetic_code(std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> code;
  while (code.size() < len) {
    if (code.size() % 32 == 0) {
      const auto target = static_cast<std::uint8_t>(rng.below(256));
      code.insert(code.end(), {0x5B, 0x60, 0x01, 0x60, target, 0x57});
    } else {
      code.push_back(static_cast<std::uint8_t>(0x01 + rng.below(11)));
    }
  }
  code.resize(len);
  return code;
}

void BM_Decode(benchmark::State& state) {
  const auto code = synthetic_code(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(evm::decode(code));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Decode)->Range(256, 24576);

void BM_BuildCfg(benchmark::State& state) {
  const std::string hex = evm::to_hex(synthetic_code(static_cast<std::size_t>(state.range(0)), 2));
  for (auto _ : state) benchmark::DoNotOptimize(cfg::build_cfg(hex, "bench"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_BuildCfg)->Range(256, 24576);

void BM_EncodeGraph(benchmark::State& state) {
  const std::string hex = evm::to_hex(synthetic_code(static_cast<std::size_t>(state.range(0)), 3));
  auto graph = cfg::build_cfg(hex, "bench");
  const embed::BlockEmbedder embedder(128, 7);
  const std::size_t blocks = graph.blocks.size();
  Matrix nodes = embed::node_features(graph, embedder);
  const auto record = embed::assemble_ocfg(std::move(graph), std::move(nodes));
  encoder::EncoderDims d;
  d.input_dim = 128;
  const auto params = encoder::EncoderParams::init(d, 1);
  for (auto _ : state) benchmark::DoNotOptimize(encoder::encode_graph(record, params));
  state.counters["blocks"] = static_cast<double>(blocks);
}
BENCHMARK(BM_EncodeGraph)->Arg(512)->Arg(2048)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_SimilarityScan(benchmark::State& state) {
  Rng rng(4);
  const auto random_features = [&](const std::string& name) {
    Vector a(fusion::kModalityDim), b(fusion::kModalityDim), c(fusion::kModalityDim);
    for (Vector* v : {&a, &b, &c})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = rng.uniform();
    return fusion::fuse(name, a, b, c);
  };
  std::vector<fusion::ContractFeatures> store;
  for (std::int64_t i = 0; i < state.range(0); ++i) store.push_back(random_features("c" + std::to_string(i)));
  const auto query = random_features("q");
  for (auto _ : state) benchmark::DoNotOptimize(fusion::rank_clones(query, store, 0.5, fusion::default_gamma()));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SimilarityScan)->Range(64, 4096);

}  // namespace

// The distro libbenchmark_main.a ships LTO bytecode from another compiler build.
BENCHMARK_MAIN();

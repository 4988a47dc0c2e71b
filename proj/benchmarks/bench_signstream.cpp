#include <benchmark/benchmark.h>

#include <random>

#include <nlohmann/json.hpp>

#include "signstream/nn.hpp"
#include "signstream/retrieval.hpp"
#include "signstream/server.hpp"
#include "signstream/synthetic.hpp"
#include "support.hpp"

using namespace signstream;

namespace {

landmarks::FeatureVector sample_features(landmarks::FeatureLayout layout) {
  std::mt19937_64 rng(1);
  return landmarks::extract_features(landmarks::prepare(synthetic::sample_hand('B', rng)), layout);
}

void BM_ForwardPointNet(benchmark::State& state) {
  const auto net = nn::make_network(nn::NetworkKind::PointNetLite, 1);
  const auto x = sample_features(landmarks::FeatureLayout::PointCloud3D);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(net, x));
}
BENCHMARK(BM_ForwardPointNet);

void BM_ForwardDense(benchmark::State& state) {
  const auto net = nn::make_network(nn::NetworkKind::DenseBaseline, 1);
  const auto x = sample_features(landmarks::FeatureLayout::Flat2D);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(net, x));
}
BENCHMARK(BM_ForwardDense);

void BM_BackwardPointNet(benchmark::State& state) {
  const auto net = nn::make_network(nn::NetworkKind::PointNetLite, 1);
  const auto x = sample_features(landmarks::FeatureLayout::PointCloud3D);
  for (auto _ : state) benchmark::DoNotOptimize(nn::backward(net, x, 3));
}
BENCHMARK(BM_BackwardPointNet);

// Full gateway path: JSON parse, normalize, forward, disambiguate, recognizer step.
void BM_HandleFrame(benchmark::State& state) {
  server::GatewayConfig cfg;
  cfg.frame_rate_cap = 0;
  server::Artifacts art;
  art.model = std::make_shared<const nn::Network>(nn::make_network(nn::NetworkKind::PointNetLite, 1));
  server::Gateway gw(cfg, art, [] { return std::int64_t{0}; });
  const auto id = *gw.open_session().session;
  gw.handle(id, R"({"type":"hello","protocol_version":1,"mode":"recognition"})");
  std::mt19937_64 rng(2);
  std::vector<std::string> frames;
  for (char c : std::string("ABCDEFGHIKLMNOPQRSTUVWXY")) {
    landmarks::FrameRecord rec;
    rec.frame = synthetic::sample_hand(c, rng);
    auto j = landmarks::to_json(rec);
    j["type"] = "frame";
    frames.push_back(j.dump());
  }
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gw.handle(id, frames[i++ % frames.size()]));
}
BENCHMARK(BM_HandleFrame);

void BM_Query(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  retrieval::HashedNGramProvider provider;
  std::vector<std::string> glosses;
  for (std::size_t i = 0; i < n; ++i) glosses.push_back("GLOSS" + std::to_string(i));
  const auto store = testkit::small_store(glosses, provider, 1);
  const auto q = provider.embed("gloss17");
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::query(store, q, 0.6));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Query)->RangeMultiplier(4)->Range(16, 4096);

void BM_Stitch(benchmark::State& state) {
  std::vector<retrieval::PoseSequence> parts;
  for (int i = 0; i < 8; ++i) parts.push_back(testkit::constant_clip(24, 75, 0.1 * i));
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::stitch(parts, 8));
}
BENCHMARK(BM_Stitch);

void BM_ProduceSentence(benchmark::State& state) {
  retrieval::HashedNGramProvider provider;
  const auto store = testkit::small_store({"TOMORROW", "I", "GO", "STORE"}, provider, 75);
  gloss::RuleBasedTranslator translator;
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::produce("I am going to the store tomorrow", store, translator, provider));
  }
}
BENCHMARK(BM_ProduceSentence);

}  // namespace

BENCHMARK_MAIN();

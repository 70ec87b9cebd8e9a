// Serial reference loops vs the OpenMP corpus kernels on synthetic data.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "halspan/combination.hpp"
#include "halspan/metrics.hpp"

using namespace halspan;

namespace {

SpanSet random_set(std::mt19937_64& rng, std::size_t len) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t pos = 0;
  while (pos + 2 < len && pairs.size() < 4) {
    const auto s = pos + rng() % (len - pos - 1);
    const auto e = s + 1 + rng() % std::min<std::size_t>(len - s, 20);
    pairs.emplace_back(s, e);
    pos = e + 1;
  }
  return SpanSet::from_pairs(pairs, len);
}

struct Corpus {
  std::vector<Instance> golds;
  std::vector<Prediction> preds;
  std::vector<SystemOutput> systems;
};

Corpus make_corpus(std::size_t n) {
  std::mt19937_64 rng(42);
  Corpus c;
  std::vector<std::vector<Prediction>> members(5);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 50 + rng() % 400;
    Instance g;
    g.id = "i" + std::to_string(i);
    g.lang = "en";
    g.answer = std::string(len, 'a');
    g.gold_hard = random_set(rng, len);
    std::vector<SpanSet> annotators;
    for (int a = 0; a < 3; ++a) annotators.push_back(random_set(rng, len));
    g.annotator_sets = annotators;
    Prediction p = Prediction::empty(g.id, len);
    p.hard = random_set(rng, len);
    for (const auto& s : p.hard.spans()) p.soft.emplace_back(s, 0.25 + 0.5 * (rng() % 2));
    c.preds.push_back(p);
    for (auto& m : members) {
      Prediction mp = Prediction::empty(g.id, len);
      mp.hard = random_set(rng, len);
      m.push_back(mp);
    }
    c.golds.push_back(std::move(g));
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    c.systems.push_back(SystemOutput::from_predictions("m" + std::to_string(k), members[k]));
  }
  return c;
}

const Corpus& corpus(std::size_t n) {
  static std::map<std::size_t, Corpus> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_corpus(n)).first;
  return it->second;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus_serial(c.preds, c.golds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateOpenMP(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus(c.preds, c.golds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CombineSerial(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(combine_corpus_serial(c.systems, c.golds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CombineOpenMP(benchmark::State& state) {
  const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(combine_corpus(c.systems, c.golds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_EvaluateOpenMP)->Arg(1000)->Arg(10000);
BENCHMARK(BM_CombineSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_CombineOpenMP)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();

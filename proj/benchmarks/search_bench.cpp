#include <benchmark/benchmark.h>

#include <random>

#include "darwin/search.hpp"

using namespace darwin;

namespace {

std::vector<Individual> random_population(int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Individual> pop;
  pop.reserve(size);
  for (int i = 0; i < size; ++i) {
    Measurement m;
    m.objectives = {uniform01(rng), uniform01(rng), uniform01(rng)};
    pop.push_back({Genome{}, EvalOutcome::ok(m), 0, 0});
  }
  return pop;
}

void BM_NondominatedSort(benchmark::State& state) {
  auto pop = random_population(static_cast<int>(state.range(0)), 99);
  for (auto _ : state) {
    auto fronts = fast_nondominated_sort(pop);
    benchmark::DoNotOptimize(fronts);
  }
}
BENCHMARK(BM_NondominatedSort)->Arg(60)->Arg(200)->Arg(600);

void BM_CrowdingDistance(benchmark::State& state) {
  auto pop = random_population(static_cast<int>(state.range(0)), 7);
  std::vector<int> front(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) front[i] = static_cast<int>(i);
  for (auto _ : state) {
    assign_crowding(pop, front);
    benchmark::DoNotOptimize(pop);
  }
}
BENCHMARK(BM_CrowdingDistance)->Arg(60)->Arg(600);

void BM_SyntheticSearch(benchmark::State& state) {
  GenomeSchema schema;
  for (int i = 0; i < 8; ++i) {
    schema.genes.push_back({i, GeneKind::Impl, 3});
    schema.seed.values.push_back(0);
  }
  EvalFn eval = [](const Genome& g) {
    Measurement m;
    std::uint64_t h = 1469598103934665603ull;
    for (int v : g.values) h = (h ^ static_cast<unsigned>(v)) * 1099511628211ull;
    m.objectives = {static_cast<double>(h % 1000), static_cast<double>((h >> 10) % 1000),
                    static_cast<double>((h >> 20) % 1000)};
    return EvalOutcome::ok(m);
  };
  for (auto _ : state) {
    SearchParams params;
    params.rng_seed = 3;
    params.max_evaluations = static_cast<int>(state.range(0));
    auto result = nsga2_run(schema, eval, params);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_SyntheticSearch)->Arg(300)->Arg(900);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <vector>

#include "novelbench/embed_index.hpp"
#include "novelbench/eval.hpp"
#include "novelbench/strategies.hpp"

using namespace novelbench;

namespace {

EmbeddingVector random_unit(SeededRng& rng, int dim) {
    std::vector<double> raw(static_cast<std::size_t>(dim));
    for (auto& v : raw) v = rng.uniform01() * 2.0 - 1.0;
    return EmbeddingVector::normalized(raw);
}

Index random_index(std::size_t n, int dim) {
    SeededRng rng(7);
    Index index("bench", dim, Field::Cs);
    const auto lo = Date(2000, 1, 1).days_since_epoch();
    for (std::size_t i = 0; i < n; ++i) {
        index.add({"p" + std::to_string(i), random_unit(rng, dim),
                   Date::from_days(lo + static_cast<std::int64_t>(rng.below(8766))), Field::Cs});
    }
    return index;
}

}  // namespace

// One RAG query against an index of realistic size (24 years x 500 papers).
static void BM_RetrieveTopK(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const int dim = static_cast<int>(state.range(1));
    const auto index = random_index(n, dim);
    SeededRng rng(11);
    const auto query = random_unit(rng, dim);
    const Date cutoff(2020, 6, 1);
    for (auto _ : state) benchmark::DoNotOptimize(retrieve_topk(index, query, 10, cutoff));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RetrieveTopK)->Args({12000, 256})->Args({12000, 1536})->Unit(benchmark::kMillisecond);

static void BM_McNemarExact(benchmark::State& state) {
    for (auto _ : state) {
        for (std::size_t b = 0; b < 25; ++b) benchmark::DoNotOptimize(mcnemar_from_counts(b, 24 - b));
    }
}
BENCHMARK(BM_McNemarExact);

static void BM_ParseWinner(benchmark::State& state) {
    const std::string text =
        "Paper X Score: 7/10. The methodology is interesting but incremental.\n"
        "Paper Y Score: 9/10. It introduces a new framework.\n"
        "The more novel and impactful paper is Paper Y";
    for (auto _ : state) benchmark::DoNotOptimize(parse_winner_slot(text));
}
BENCHMARK(BM_ParseWinner);
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "mcpforge/box.hpp"
#include "mcpforge/retriever.hpp"

using namespace mcpforge;

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dims);
    for (auto& x : v) x = n(rng);
    return v;
}

McpBox random_box(std::size_t m, std::size_t dims) {
    std::mt19937_64 rng(42);
    McpBox box;
    box.embedder_id = "bench/" + std::to_string(dims);
    box.dims = dims;
    for (std::size_t i = 0; i < m; ++i) {
        BoxEntry e;
        e.mcp.name = "tool" + std::to_string(i);
        e.mcp.provenance = std::to_string(1000000 + i);
        e.mcp.mcp_id = make_mcp_id(e.mcp.name, e.mcp.provenance);
        e.embedding = normalized(random_unit(rng, dims));
        box.entries.push_back(std::move(e));
    }
    return box;
}

void bm_score_all(benchmark::State& state) {
    const auto box = random_box(static_cast<std::size_t>(state.range(0)), 256);
    std::mt19937_64 rng(7);
    const auto query = normalized(random_unit(rng, 256));
    for (auto _ : state) benchmark::DoNotOptimize(score_all(query, box));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_score_all)->Arg(100)->Arg(1000)->Arg(10000);

void bm_select_threshold(benchmark::State& state) {
    const auto box = random_box(static_cast<std::size_t>(state.range(0)), 64);
    std::mt19937_64 rng(7);
    const auto scores = score_all(normalized(random_unit(rng, 64)), box);
    SelectionConfig config;
    config.tau = 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(select(scores, config));
}
BENCHMARK(bm_select_threshold)->Arg(100)->Arg(1000)->Arg(10000);

void bm_select_top_k(benchmark::State& state) {
    const auto box = random_box(static_cast<std::size_t>(state.range(0)), 64);
    std::mt19937_64 rng(7);
    const auto scores = score_all(normalized(random_unit(rng, 64)), box);
    SelectionConfig config;
    config.mode = SelectionMode::top_k;
    config.k = 10;
    for (auto _ : state) benchmark::DoNotOptimize(select(scores, config));
}
BENCHMARK(bm_select_top_k)->Arg(100)->Arg(1000)->Arg(10000);

void bm_compute_stats(benchmark::State& state) {
    const auto box = random_box(static_cast<std::size_t>(state.range(0)), 64);
    for (auto _ : state) benchmark::DoNotOptimize(compute_stats(box, 0.7));
}
BENCHMARK(bm_compute_stats)->Arg(50)->Arg(200)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();

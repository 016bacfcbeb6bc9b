// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs. OpenMP kernels on final-scale shapes (32×32 tokens, 64 channels).
// Pin the parallel thread count with OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "stepvar/recovery.hpp"
#include "stepvar/reference.hpp"
#include "stepvar/scoring.hpp"
#include "stepvar/tensor_ops.hpp"

using namespace stepvar;

namespace {

FeatureGrid grid(std::size_t side, std::size_t channels) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureGrid g(1, side, side, channels);
    for (auto& v : g.data()) v = n(rng);
    return g;
}

TokenMatrix matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    TokenMatrix m(rows, cols);
    for (auto& v : m.data) v = n(rng);
    return m;
}

std::vector<Index> every_third(std::size_t L) {
    std::vector<Index> v;
    for (std::size_t l = 0; l < L; l += 3) v.push_back(static_cast<Index>(l));
    return v;
}

template <bool Parallel>
void BM_TexturalScore(benchmark::State& state) {
    const FeatureGrid x = grid(static_cast<std::size_t>(state.range(0)), 64);
    for (auto _ : state) {
        if constexpr (Parallel) benchmark::DoNotOptimize(textural_score(x));
        else benchmark::DoNotOptimize(reference::textural_score(x));
    }
}

template <bool Parallel>
void BM_StructuralScore(benchmark::State& state) {
    const FeatureGrid x = grid(static_cast<std::size_t>(state.range(0)), 64);
    const PruneParams p;
    for (auto _ : state) {
        if constexpr (Parallel) benchmark::DoNotOptimize(structural_score(x, p));
        else benchmark::DoNotOptimize(reference::structural_score(x, p));
    }
}

template <bool Parallel>
void BM_NearestAssignment(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto kept = every_third(side * side);
    for (auto _ : state) {
        if constexpr (Parallel) benchmark::DoNotOptimize(nearest_assignment(kept, side, side));
        else benchmark::DoNotOptimize(reference::nearest_assignment(kept, side, side));
    }
}

template <bool Parallel>
void BM_Linear(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Linear w{64, 256, matrix(256, 64, 2).data, matrix(1, 256, 3).data};
    const TokenMatrix x = matrix(rows, 64, 4);
    TokenMatrix y;
    for (auto _ : state) {
        if constexpr (Parallel) kernels::linear(x, w, y);
        else reference::linear(x, w, y);
        benchmark::DoNotOptimize(y.data.data());
    }
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t cache = 1024;
    const TokenMatrix q = matrix(rows, 64, 5), k = matrix(cache, 64, 6), v = matrix(cache, 64, 7);
    std::vector<Index> idx(std::max(rows, cache));
    std::iota(idx.begin(), idx.end(), Index{0});
    const auto kpos = ToyModel::token_positions({idx.data(), cache}, 32, 32);
    const auto qpos = ToyModel::token_positions({idx.data(), rows}, 32, 32);
    const KvSegment seg{k.data.data(), v.data.data(), kpos.data(), cache};
    const std::vector<double> slopes{0.0, 1.0, 2.0, 3.0};
    const AttentionBias bias{slopes, qpos, 32.0, 32.0};
    TokenMatrix out;
    for (auto _ : state) {
        if constexpr (Parallel) kernels::attention(q, {&seg, 1}, 4, bias, out);
        else reference::attention(q, {&seg, 1}, 4, bias, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}

}  // namespace

BENCHMARK(BM_TexturalScore<false>)->Name("textural_score/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_TexturalScore<true>)->Name("textural_score/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_StructuralScore<false>)->Name("structural_score/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_StructuralScore<true>)->Name("structural_score/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_NearestAssignment<false>)->Name("nearest_assignment/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_NearestAssignment<true>)->Name("nearest_assignment/openmp")->Arg(16)->Arg(32);
BENCHMARK(BM_Linear<false>)->Name("linear/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_Linear<true>)->Name("linear/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Attention<true>)->Name("attention/openmp")->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

// The OpenMP kernels must agree bit for bit with the serial reference at any
// thread count.

#include <gtest/gtest.h>
#include <omp.h>

#include <random>

#include "oracles.hpp"
#include "stepvar/reference.hpp"
#include "stepvar/scoring.hpp"
#include "stepvar/tensor_ops.hpp"

using namespace stepvar;

namespace {

class Parity : public ::testing::TestWithParam<int> {
protected:
    void SetUp() override {
        m_saved = omp_get_max_threads();
        omp_set_num_threads(GetParam());
    }
    void TearDown() override { omp_set_num_threads(m_saved); }

private:
    int m_saved = 1;
};

TokenMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    TokenMatrix m(r, c);
    for (auto& v : m.data) v = n(rng);
    return m;
}

}  // namespace

TEST_P(Parity, ScoringKernels) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FeatureGrid x = oracle::random_grid(3, 9 + seed, 7 + seed, 8, seed);
        EXPECT_EQ(center_tokens(x), reference::center_tokens(x));
        EXPECT_EQ(high_pass_3x3(x), reference::high_pass_3x3(x));
        EXPECT_EQ(textural_score(x), reference::textural_score(x));
        const PrincipalDirections a = first_principal_direction(center_tokens(x), 4, seed);
        const PrincipalDirections b = reference::first_principal_direction(reference::center_tokens(x), 4, seed);
        EXPECT_EQ(a.vectors, b.vectors);
        EXPECT_EQ(a.degenerate, b.degenerate);
        PruneParams p;
        p.rng_seed = seed;
        EXPECT_EQ(structural_score(x, p), reference::structural_score(x, p));
    }
}

TEST_P(Parity, NearestAssignment) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const std::size_t h = 1 + rng() % 20, w = 1 + rng() % 20;
        std::vector<Index> src;
        for (std::size_t l = 0; l < h * w; ++l)
            if (rng() % 4 == 0) src.push_back(static_cast<Index>(l));
        if (src.empty()) src.push_back(0);
        EXPECT_EQ(nearest_assignment(src, h, w), reference::nearest_assignment(src, h, w));
    }
}

TEST_P(Parity, LinearAndAttention) {
    const std::size_t C = 32, heads = 4;
    Linear w{C, 48, random_matrix(48, C, 1).data, random_matrix(1, 48, 2).data};
    const TokenMatrix x = random_matrix(37, C, 3);
    TokenMatrix y1, y2;
    kernels::linear(x, w, y1);
    reference::linear(x, w, y2);
    EXPECT_EQ(y1.data, y2.data);

    const TokenMatrix k0 = random_matrix(20, C, 4), v0 = random_matrix(20, C, 5);
    const TokenMatrix k1 = random_matrix(37, C, 6), v1 = random_matrix(37, C, 7);
    std::vector<Index> t0(20), t1(37);
    std::iota(t0.begin(), t0.end(), Index{0});
    std::iota(t1.begin(), t1.end(), Index{3});
    const auto p0 = ToyModel::token_positions(t0, 5, 4);
    const auto p1 = ToyModel::token_positions(t1, 8, 5);
    const KvSegment segs[] = {{k0.data.data(), v0.data.data(), p0.data(), 20},
                              {k1.data.data(), v1.data.data(), p1.data(), 37}};
    const std::vector<double> slopes{0.0, 0.5, 1.0, 1.5};
    const AttentionBias bias{slopes, p1, 8.0, 5.0};
    TokenMatrix a1, a2;
    kernels::attention(x, segs, heads, bias, a1);
    reference::attention(x, segs, heads, bias, a2);
    EXPECT_EQ(a1.data, a2.data);
}

INSTANTIATE_TEST_SUITE_P(Threads, Parity, ::testing::Values(1, 2, 4, 7));

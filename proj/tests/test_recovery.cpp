// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "stepvar/error.hpp"
#include "stepvar/recovery.hpp"
#include "stepvar/tensor_ops.hpp"

using namespace stepvar;

namespace {

// Token value = its own index, one channel, so copies are easy to trace.
FeatureGrid index_grid(std::size_t h, std::size_t w) {
    FeatureGrid g(1, h, w, 1);
    for (std::size_t l = 0; l < h * w; ++l) g.at(0, l, 0) = static_cast<double>(l);
    return g;
}

}  // namespace

TEST(NearestNeighbor, OppositeCornersOnFourByFour) {
    const std::vector<Index> kept{0, 15};
    const auto a = nearest_assignment(kept, 4, 4);
    // (1,2) and (2,1) are equidistant from both corners; the earlier entry wins.
    EXPECT_EQ(a[1 * 4 + 2], 0u);
    EXPECT_EQ(a[2 * 4 + 1], 0u);
    EXPECT_EQ(a[0 * 4 + 3], 0u);
    EXPECT_EQ(a[2 * 4 + 2], 1u);
    EXPECT_EQ(a[3 * 4 + 2], 1u);
    EXPECT_EQ(a, oracle::voronoi(kept, 4, 4));
}

TEST(NearestNeighbor, FourCornersOnFourByFour) {
    const auto a = nearest_assignment(std::vector<Index>{0, 3, 12, 15}, 4, 4);
    EXPECT_EQ(a[1 * 4 + 1], 0u);
    EXPECT_EQ(a[1 * 4 + 2], 1u);
    EXPECT_EQ(a[2 * 4 + 1], 2u);
    EXPECT_EQ(a[2 * 4 + 2], 3u);
}

TEST(NearestNeighbor, KeptTokensAreFixedPoints) {
    const FeatureGrid x = index_grid(5, 6);
    const SparseTokens s = gather_tokens(x, {{2, 7, 19, 29}});
    const FeatureGrid out = nn_propagate(s);
    for (Index k : s.indices[0]) EXPECT_EQ(out.at(0, static_cast<std::size_t>(k), 0), static_cast<double>(k));
}

TEST(NearestNeighbor, MatchesBruteForceVoronoi) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 1 + rng() % 32, w = 1 + rng() % 32, L = h * w;
        const std::size_t k = 1 + rng() % L;
        std::vector<Index> all(L);
        std::iota(all.begin(), all.end(), Index{0});
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<Index> kept(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(kept.begin(), kept.end());
        ASSERT_EQ(nearest_assignment(kept, h, w), oracle::voronoi(kept, h, w)) << h << "x" << w << " k=" << k;
    }
}

TEST(NearestNeighbor, SingleSourceFillsEverything) {
    const FeatureGrid out = nn_propagate(gather_tokens(index_grid(3, 3), {{4}}));
    for (double v : out.data()) EXPECT_EQ(v, 4.0);
}

TEST(NearestNeighbor, RejectsEmptyAndOutOfRange) {
    EXPECT_THROW(nearest_assignment(std::vector<Index>{}, 2, 2), InvalidInput);
    EXPECT_THROW(nearest_assignment(std::vector<Index>{4}, 2, 2), InvalidInput);
}

TEST(CacheUpsample, ThreeToFiveIndexMap) {
    const FeatureGrid up = cache_upsample(index_grid(3, 3), 5, 5);
    const auto m = oracle::resize_map(3, 5);
    EXPECT_EQ(m, (std::vector<std::size_t>{0, 0, 1, 1, 2}));
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(up.at(0, r * 5 + c, 0), static_cast<double>(m[r] * 3 + m[c]));
}

TEST(CacheUpsample, NonSquareAndIdentity) {
    const FeatureGrid x = oracle::random_grid(2, 3, 4, 2, 1);
    EXPECT_EQ(cache_upsample(x, 3, 4), x);
    const FeatureGrid up = cache_upsample(x, 7, 9);
    const auto mr = oracle::resize_map(3, 7), mc = oracle::resize_map(4, 9);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t c = 0; c < 9; ++c)
                EXPECT_EQ(up.at(b, r * 9 + c, 1), x.at(b, mr[r] * 4 + mc[c], 1));
    EXPECT_THROW(cache_upsample(x, 2, 4), InvalidInput);
}

TEST(AnchorCopy, SixBySixStrideThree) {
    const auto anchors = anchor_grid(6, 6, 3);
    EXPECT_EQ(anchors, (std::vector<Index>{0, 3, 18, 21}));
    std::vector<Index> kept = anchors;
    kept.push_back(7);
    std::sort(kept.begin(), kept.end());
    const FeatureGrid out = anchor_copy(gather_tokens(index_grid(6, 6), {kept}), anchors);
    const auto owner = oracle::voronoi(anchors, 6, 6);
    for (std::size_t l = 0; l < 36; ++l) {
        const double want = l == 7 ? 7.0 : static_cast<double>(anchors[owner[l]]);
        EXPECT_EQ(out.at(0, l, 0), want) << "cell " << l;
    }
}

TEST(AnchorCopy, MissingAnchorThrows) {
    const auto anchors = anchor_grid(6, 6, 3);
    EXPECT_THROW(anchor_copy(gather_tokens(index_grid(6, 6), {{0, 3, 18}}), anchors), InvalidInput);
    EXPECT_THROW(anchor_grid(6, 6, 0), InvalidInput);
}

TEST(ForceInclude, AnchorsPlusBestRemaining) {
    const std::vector<double> scores{0.1, 0.9, 0.2, 0.8, 0.0, 0.7, 0.3, 0.6, 0.05};
    const std::vector<Index> anchors{0, 4, 8};
    EXPECT_EQ(force_include(scores, 4, anchors), (std::vector<Index>{0, 1, 4, 8}));
    EXPECT_EQ(force_include(scores, 6, anchors), (std::vector<Index>{0, 1, 3, 4, 5, 8}));
    EXPECT_EQ(force_include(scores, 3, anchors), anchors);
}

TEST(ForceInclude, GridOverloadAndErrors) {
    const FeatureGrid x = index_grid(3, 3);
    ScoreVector s(1, 9);
    s.values = {0.1, 0.9, 0.2, 0.8, 0.0, 0.7, 0.3, 0.6, 0.05};
    const SparseTokens sel = gather_tokens(x, top_k(s, 4));
    const std::vector<Index> anchors{0, 4, 8};
    const SparseTokens forced = force_include(x, s, sel, anchors);
    EXPECT_EQ(forced.indices.front(), (std::vector<Index>{0, 1, 4, 8}));
    EXPECT_THROW(force_include(s.values, 2, anchors), InvalidInput);
    EXPECT_THROW(force_include(s.values, 4, std::vector<Index>{0, 0}), InvalidInput);
    EXPECT_THROW(force_include(s.values, 4, std::vector<Index>{9}), InvalidInput);
}

TEST(RecoveryStrategy, NamesAndValidation) {
    for (auto k : {RecoveryKind::nearest_neighbor, RecoveryKind::cache_upsample, RecoveryKind::anchor_copy})
        EXPECT_EQ(parse_recovery_kind(to_string(k)), k);
    EXPECT_THROW(parse_recovery_kind("bilinear"), InvalidInput);
    RecoveryStrategy r{RecoveryKind::anchor_copy, 0};
    EXPECT_THROW(r.validate(), InvalidInput);
}

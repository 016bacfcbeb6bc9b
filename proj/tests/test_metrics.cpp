// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stepvar/error.hpp"
#include "stepvar/metrics.hpp"

using namespace stepvar;

namespace {

// Separable-Gaussian SSIM on one channel-averaged map, batch 1.
double ssim_oracle(const FeatureGrid& x, const FeatureGrid& y) {
    const std::size_t H = x.height(), W = x.width(), C = x.channels();
    std::vector<double> a(H * W, 0.0), b(H * W, 0.0);
    for (std::size_t l = 0; l < H * W; ++l) {
        for (std::size_t c = 0; c < C; ++c) {
            a[l] += x.at(0, l, c) / C;
            b[l] += y.at(0, l, c) / C;
        }
    }
    int win = static_cast<int>(std::min<std::size_t>({11, H, W}));
    if (win % 2 == 0) --win;
    const double sigma = 1.5 * win / 11.0;
    std::vector<double> g1(win);
    double z = 0.0;
    for (int i = 0; i < win; ++i) z += g1[i] = std::exp(-std::pow(i - win / 2, 2) / (2 * sigma * sigma));
    for (auto& v : g1) v /= z;

    double lo = x.data()[0], hi = x.data()[0];
    for (double v : x.data()) lo = std::min(lo, v), hi = std::max(hi, v);
    const double L = hi > lo ? hi - lo : 1.0;
    const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);

    double total = 0.0;
    int n = 0;
    for (std::size_t r0 = 0; r0 + win <= H; ++r0) {
        for (std::size_t c0 = 0; c0 + win <= W; ++c0) {
            double ma = 0, mb = 0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    ma += g1[r] * g1[c] * a[(r0 + r) * W + c0 + c];
                    mb += g1[r] * g1[c] * b[(r0 + r) * W + c0 + c];
                }
            double va = 0, vb = 0, cov = 0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    const double da = a[(r0 + r) * W + c0 + c] - ma, db = b[(r0 + r) * W + c0 + c] - mb;
                    va += g1[r] * g1[c] * da * da;
                    vb += g1[r] * g1[c] * db * db;
                    cov += g1[r] * g1[c] * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    }
    return total / n;
}

}  // namespace

TEST(Psnr, HandComputed) {
    const FeatureGrid a(1, 2, 2, 1, {0, 1, 2, 3});
    const FeatureGrid b(1, 2, 2, 1, {0, 1, 2, 4});
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(9.0 / 0.25), 1e-12);
    EXPECT_DOUBLE_EQ(mean_squared_error(a, b), 0.25);
}

TEST(Psnr, IdenticalIsCapped) {
    const FeatureGrid a = oracle::random_grid(1, 4, 4, 3, 0);
    EXPECT_EQ(psnr(a, a), kPsnrCapDb);
}

TEST(Psnr, ConstantReferenceUsesUnitRange) {
    const FeatureGrid a(1, 1, 2, 1, {5, 5});
    const FeatureGrid b(1, 1, 2, 1, {5, 5.1});
    EXPECT_EQ(dynamic_range(a), 1.0);
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / 0.005), 1e-9);
}

TEST(Psnr, ShapeMismatchThrows) {
    EXPECT_THROW(psnr(FeatureGrid(1, 2, 2, 1), FeatureGrid(1, 2, 1, 1)), InvalidInput);
}

TEST(Ssim, IdenticalIsExactlyOne) {
    const FeatureGrid a = oracle::random_grid(2, 16, 16, 4, 1);
    EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, MatchesSeparableOracle) {
    for (auto [h, w] : {std::pair{16, 16}, std::pair{12, 20}, std::pair{5, 7}, std::pair{4, 4}, std::pair{1, 3}}) {
        const FeatureGrid a = oracle::random_grid(1, h, w, 3, h * 31 + w);
        FeatureGrid b = a;
        const FeatureGrid noise = oracle::random_grid(1, h, w, 3, 99);
        for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] += 0.3 * noise.data()[i];
        EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-10) << h << "x" << w;
    }
}

TEST(Ssim, NegatedMapIsAnticorrelated) {
    // Needs locally zero-mean input: with nonzero window means the luminance
    // term turns negative too and the product comes out positive.
    FeatureGrid a(1, 12, 12, 1);
    for (std::size_t l = 0; l < 144; ++l) a.at(0, l, 0) = ((l / 12 + l % 12) % 2) ? 1.0 : -1.0;
    FeatureGrid b = a;
    for (auto& v : b.data()) v = -v;
    EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, DegradesWithNoise) {
    const FeatureGrid a = oracle::random_grid(1, 16, 16, 2, 2);
    const FeatureGrid n = oracle::random_grid(1, 16, 16, 2, 3);
    double last = 1.0;
    for (double s : {0.05, 0.2, 0.8}) {
        FeatureGrid b = a;
        for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] += s * n.data()[i];
        const double v = ssim(a, b);
        EXPECT_LT(v, last);
        last = v;
    }
}

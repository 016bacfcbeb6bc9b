// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "stepvar/feature_grid.hpp"

namespace stepvar {

/// Reported instead of +∞ when the two grids are identical; also an upper clamp.
inline constexpr double kPsnrCapDb = 99.0;

/// max − min of all entries; 1 when the grid is constant.
double dynamic_range(const FeatureGrid& reference);

double mean_squared_error(const FeatureGrid& reference, const FeatureGrid& test);

/**
 * 10·log10(range² / MSE) where range is the dynamic range of `reference`.
 * Feature maps are unbounded, so there is no fixed 8-bit peak. Capped at
 * kPsnrCapDb.
 */
double psnr(const FeatureGrid& reference, const FeatureGrid& test);

struct SsimOptions {
    int window = 11;      ///< shrunk to the largest odd size ≤ min(H, W) on small maps
    double sigma = 1.5;   ///< scaled by window / 11 when the window is shrunk
    double k1 = 0.01;
    double k2 = 0.03;
};

/**
 * Mean SSIM over all valid Gaussian windows of the channel-averaged maps,
 * averaged over batch rows. The dynamic range of `reference` sets the
 * stabilising constants.
 */
double ssim(const FeatureGrid& reference, const FeatureGrid& test, const SsimOptions& options = {});

}  // namespace stepvar

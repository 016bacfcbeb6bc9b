// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "stepvar/feature_grid.hpp"

namespace stepvar {

/// Subtracts the per-(batch, channel) token mean. Computed as (L·x − Σx) / L
/// so that adding a constant vector to every token is cancelled exactly
/// whenever the inputs are exactly representable.
FeatureGrid center_tokens(const FeatureGrid& x);

/// 3×3 mean filter over each channel, normalised by the number of in-bounds
/// cells so a constant map stays constant up to the borders.
FeatureGrid avg_pool_3x3(const FeatureGrid& x);

/// x − avg_pool_3x3(x), evaluated as (n·x − Σwindow) / n.
FeatureGrid high_pass_3x3(const FeatureGrid& x);

/// Row b of the result holds x's tokens at indices[b], in order. Each row of
/// indices must be strictly ascending and within [0, L).
SparseTokens gather_tokens(const FeatureGrid& x, const KeptIndices& indices);

/// Writes sparse tokens into a copy of `base` at their kept positions.
FeatureGrid scatter_tokens(const SparseTokens& sparse, FeatureGrid base);

CoordGrid make_coord_grid(std::size_t height, std::size_t width);

}  // namespace stepvar

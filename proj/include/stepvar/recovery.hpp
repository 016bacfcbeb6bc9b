// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "stepvar/feature_grid.hpp"
#include "stepvar/scoring.hpp"

namespace stepvar {

enum class RecoveryKind { nearest_neighbor, cache_upsample, anchor_copy };

struct RecoveryStrategy {
    RecoveryKind kind = RecoveryKind::nearest_neighbor;
    int anchor_stride = 3;  ///< only used by anchor_copy

    void validate() const;
};

std::string_view to_string(RecoveryKind k);
RecoveryKind parse_recovery_kind(std::string_view name);

/**
 * For each of the H×W positions, the position in `sources` (an ascending list
 * of token indices) of the closest source under squared Euclidean distance on
 * integer (row, col) coordinates. Ties go to the earliest entry of `sources`.
 */
std::vector<std::size_t> nearest_assignment(std::span<const Index> sources, std::size_t height, std::size_t width);

/// Dense map where every position holds the processed feature of its nearest kept token.
FeatureGrid nn_propagate(const SparseTokens& sparse);

/// Nearest-neighbour upsampling: output (r, c) reads source (⌊r·h/H⌋, ⌊c·w/W⌋).
FeatureGrid cache_upsample(const FeatureGrid& prev, std::size_t height, std::size_t width);

/// Row-major positions (r, c) with r % stride == 0 and c % stride == 0.
std::vector<Index> anchor_grid(std::size_t height, std::size_t width, int stride);

/// Kept positions keep their own features; pruned positions copy the nearest anchor.
/// Every anchor must be a kept index in every batch row.
FeatureGrid anchor_copy(const SparseTokens& sparse, std::span<const Index> anchors);

/// Keeps `must_keep` plus the highest-scoring remaining tokens, k in total,
/// returned ascending. Ties resolve toward lower indices.
std::vector<Index> force_include(std::span<const double> scores, std::size_t k, std::span<const Index> must_keep);

/// Row-wise force_include over a selection: the kept count is unchanged and
/// features are re-gathered from `x`.
SparseTokens force_include(const FeatureGrid& x, const ScoreVector& scores, const SparseTokens& selection,
                           std::span<const Index> must_keep);

}  // namespace stepvar

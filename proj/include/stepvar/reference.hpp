// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Single-threaded reference versions of the OpenMP kernels. They follow the
// same arithmetic order, so results must match the parallel path bit for bit.

#include <cstdint>
#include <span>
#include <vector>

#include "stepvar/feature_grid.hpp"
#include "stepvar/model.hpp"
#include "stepvar/scoring.hpp"

namespace stepvar::reference {

FeatureGrid center_tokens(const FeatureGrid& x);
FeatureGrid high_pass_3x3(const FeatureGrid& x);
ScoreVector textural_score(const FeatureGrid& x);
PrincipalDirections first_principal_direction(const FeatureGrid& centered, int iterations, std::uint64_t seed);
ScoreVector structural_score(const FeatureGrid& x, const PruneParams& params);
std::vector<std::size_t> nearest_assignment(std::span<const Index> sources, std::size_t height, std::size_t width);

void linear(const TokenMatrix& x, const Linear& w, TokenMatrix& y);
void attention(const TokenMatrix& q, std::span<const KvSegment> context, std::size_t heads, const AttentionBias& bias,
               TokenMatrix& out);

}  // namespace stepvar::reference

// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "stepvar/feature_grid.hpp"

namespace stepvar {

/// Per-token scalar scores, [batch][token].
struct ScoreVector {
    std::size_t batch = 0;
    std::size_t tokens = 0;
    std::vector<double> values;

    ScoreVector() = default;
    ScoreVector(std::size_t b, std::size_t l) : batch(b), tokens(l), values(b * l, 0.0) {}

    std::span<double> row(std::size_t b) noexcept { return {values.data() + b * tokens, tokens}; }
    std::span<const double> row(std::size_t b) const noexcept { return {values.data() + b * tokens, tokens}; }

    friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

struct PruneParams {
    double ratio = 0.0;        ///< fraction of tokens dropped, in [0, 1]
    double w_str = 0.5;        ///< weight of the structural score in the fused score
    int power_iters = 3;       ///< power-iteration steps
    std::uint64_t rng_seed = 0;

    /// Throws InvalidInput on out-of-range fields.
    void validate() const;
};

/// Leading eigen-directions of XᵀX, one unit vector per batch row.
struct PrincipalDirections {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::vector<double> vectors;        ///< [batch][channel]
    std::vector<std::uint8_t> degenerate;  ///< 1 when the iteration collapsed to zero

    std::span<const double> direction(std::size_t b) const noexcept {
        return {vectors.data() + b * channels, channels};
    }
};

/// Below this norm of XᵀXv a batch row is treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

/// Seeded unit vector used to start power iteration for batch row `b`.
std::vector<double> power_iteration_init(std::size_t channels, std::uint64_t seed, std::size_t b);

/**
 * Power iteration v ← normalize(Xᵀ(X v)) on token-centred features.
 *
 * `rayleigh`, when non-null, receives vᵀXᵀXv after every step for each batch
 * row, laid out [batch][iteration].
 */
PrincipalDirections first_principal_direction(const FeatureGrid& centered, int iterations, std::uint64_t seed,
                                              std::vector<double>* rayleigh = nullptr);

/// |X_centered · v| per token; all-zero rows for degenerate batch rows.
ScoreVector structural_score(const FeatureGrid& x, const PruneParams& params);

/// Channel-summed squared 3×3 high-pass residual per token.
ScoreVector textural_score(const FeatureGrid& x);

/// ‖x_i − mean token‖₂ per token (ablation baseline).
ScoreVector l2norm_score(const FeatureGrid& x);

/// Seeded uniform scores in [0, 1) (ablation baseline).
ScoreVector random_score(std::size_t batch, std::size_t tokens, std::uint64_t seed);

/// max(1, ⌊(1 − r)·L⌋) for r in [0, 1). r = 1 is rejected: skip the stage instead.
std::size_t keep_count(double ratio, std::size_t tokens);

/// Indices of the k highest scores per row, ties broken toward the lower
/// index, returned in ascending index order.
KeptIndices top_k(const ScoreVector& scores, std::size_t k);

struct Selection {
    SparseTokens sparse;
    ScoreVector scores;  ///< the scores the selection was taken from
};

/// S_total = w_str · S_str + S_txt, then top-k with k = keep_count(r, L).
Selection joint_select(const FeatureGrid& x, const PruneParams& params);

enum class PruneStrategy { stepvar, hf_only, l2norm, random, none };

std::string_view to_string(PruneStrategy s);
/// Throws InvalidInput for unknown names.
PruneStrategy parse_prune_strategy(std::string_view name);

/// Importance scores under the given strategy. `none` yields all-zero scores.
ScoreVector score_tokens(const FeatureGrid& x, PruneStrategy strategy, const PruneParams& params);

/// Scores with `strategy` and keeps the top keep_count(r, L) tokens.
Selection select_tokens(const FeatureGrid& x, PruneStrategy strategy, const PruneParams& params);

}  // namespace stepvar

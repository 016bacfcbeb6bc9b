// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "stepvar/feature_grid.hpp"
#include "stepvar/model.hpp"
#include "stepvar/recovery.hpp"
#include "stepvar/scoring.hpp"

namespace stepvar {

struct ScaleShape {
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t tokens() const noexcept { return height * width; }
    friend bool operator==(const ScaleShape&, const ScaleShape&) = default;
};

/// Pruning applied at one scale. ratio 1 skips the scale's transformer pass.
struct PruneSpec {
    double ratio = 0.0;
    PruneStrategy strategy = PruneStrategy::none;
    RecoveryStrategy recovery;
    PruneParams params;

    bool skipped() const noexcept { return ratio >= 1.0; }
};

struct ScaleSchedule {
    std::vector<ScaleShape> scales;
    std::vector<PruneSpec> prune;  ///< one entry per scale

    std::size_t size() const noexcept { return scales.size(); }
    void validate() const;
    /// Same resolutions, no pruning anywhere.
    ScaleSchedule dense() const;

    /// Square scales with the given side lengths and no pruning.
    static ScaleSchedule from_sides(const std::vector<std::size_t>& sides);
    /// Sides {1, 2, 4, 8, 12, 16, 24, 32}: 1 to 1024 tokens.
    static ScaleSchedule default_schedule();
    /// Applies `ratios` to the last ratios.size() scales with one strategy/recovery.
    ScaleSchedule with_last_ratios(const std::vector<double>& ratios, PruneStrategy strategy,
                                   RecoveryStrategy recovery = {}, PruneParams params = {}) const;
};

/// Which tokens of a pruned scale enter the KV cache.
enum class CacheMode { kept_only, dense_recovered };

std::string_view to_string(CacheMode m);
CacheMode parse_cache_mode(std::string_view name);

struct NoiseSpec {
    std::size_t scale = 1;  ///< 1-based scale whose dense output is perturbed
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct PipelineOptions {
    std::size_t batch = 1;
    std::uint64_t input_seed = 0;
    CacheMode cache_mode = CacheMode::kept_only;
    std::optional<NoiseSpec> noise;
    std::size_t cond_len = 0;  ///< conditioning length, FLOP accounting only
};

struct ScaleRecord {
    std::size_t scale = 0;  ///< 1-based
    ScaleShape shape;
    std::size_t kept = 0;  ///< tokens through the transformer (0 when skipped)
    bool skipped = false;
    std::size_t cache_tokens = 0;  ///< cache length seen by this scale
    std::int64_t wall_ns = 0;
    double flops = 0.0;
    KeptIndices kept_indices;  ///< empty for skipped scales
};

struct PipelineResult {
    std::vector<FeatureGrid> outputs;  ///< dense output of every scale
    std::vector<ScaleRecord> records;

    const FeatureGrid& final_output() const { return outputs.back(); }
};

/// Seeded N(0, 1) start token for each batch row, as a B×1×1×C grid.
FeatureGrid start_tokens(std::size_t batch, std::size_t channels, std::uint64_t input_seed);

/**
 * Runs the coarse-to-fine schedule. At each scale the previous dense output is
 * upsampled and embedded; pruned scales score, select, transform the kept
 * tokens against the KV cache and recover a dense map; skipped scales pass the
 * upsampled map through unchanged.
 */
PipelineResult run_pruned(const ToyModel& model, const ScaleSchedule& schedule, const PipelineOptions& options);

/// run_pruned on a schedule without pruning; rejects schedules with nonzero ratios.
std::vector<FeatureGrid> run_dense(const ToyModel& model, const ScaleSchedule& schedule, std::uint64_t input_seed,
                                   std::size_t batch = 1);

/// Final dense output of a run whose scale-`scale` output is perturbed by N(0, sigma²) noise.
FeatureGrid inject_noise(const ToyModel& model, const ScaleSchedule& schedule, std::uint64_t input_seed,
                         std::size_t scale, double sigma, std::uint64_t noise_seed, std::size_t batch = 1);

/**
 * Multiply-accumulate count of one transformer layer over `tokens` query
 * tokens with `cache` cached tokens:
 *   attention   2·L·(L + cache)·C      (QKᵀ and PV)
 *   projections 4·L·C²                 (Q, K, V, O)
 *   FFN         2·L·C·(ffn_mult·C)     (up and down)
 *   conditioning 2·L·cond·C + 2·L·C²   (cross-attention, when cond > 0)
 */
double layer_flops(std::size_t tokens, std::size_t cache, const ToyModelConfig& model, std::size_t cond_len = 0);

struct FlopReport {
    std::vector<double> per_scale;
    std::vector<std::size_t> effective_tokens;
    std::vector<std::size_t> cache_tokens;
    double total = 0.0;
};

/// Analytic cost of a schedule. Pruned scales count kept tokens only; skipped scales cost nothing.
FlopReport flop_count(const ScaleSchedule& schedule, const ToyModelConfig& model,
                      CacheMode cache_mode = CacheMode::kept_only, std::size_t cond_len = 0);

}  // namespace stepvar

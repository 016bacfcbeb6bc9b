// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/pipeline.hpp"

#include <chrono>
#include <numeric>
#include <random>
#include <string>

#include "stepvar/error.hpp"
#include "stepvar/tensor_ops.hpp"

namespace stepvar {

void ScaleSchedule::validate() const {
    if (scales.empty()) {
        throw InvalidInput("schedule: at least one scale is required");
    }
    if (prune.size() != scales.size()) {
        throw InvalidInput("schedule: " + std::to_string(prune.size()) + " prune specs for " +
                           std::to_string(scales.size()) + " scales");
    }
    for (std::size_t s = 0; s < scales.size(); ++s) {
        const std::string where = "schedule: scale " + std::to_string(s + 1) + ": ";
        if (scales[s].height == 0 || scales[s].width == 0) {
            throw InvalidInput(where + "height and width must be positive");
        }
        if (s > 0 && (scales[s].height < scales[s - 1].height || scales[s].width < scales[s - 1].width)) {
            throw InvalidInput(where + "resolution must not shrink from the previous scale");
        }
        const PruneSpec& p = prune[s];
        if (!(p.ratio >= 0.0 && p.ratio <= 1.0)) {
            throw InvalidInput(where + "ratio must lie in [0, 1]");
        }
        if (p.strategy == PruneStrategy::none && p.ratio > 0.0 && !p.skipped()) {
            throw InvalidInput(where + "strategy 'none' requires ratio 0 (or 1 to skip)");
        }
        p.recovery.validate();
        PruneParams params = p.params;
        params.ratio = p.ratio;
        params.validate();
    }
}

ScaleSchedule ScaleSchedule::dense() const {
    ScaleSchedule out = *this;
    for (auto& p : out.prune) p = PruneSpec{};
    return out;
}

ScaleSchedule ScaleSchedule::from_sides(const std::vector<std::size_t>& sides) {
    ScaleSchedule s;
    for (const std::size_t side : sides) s.scales.push_back({side, side});
    s.prune.assign(sides.size(), PruneSpec{});
    return s;
}

ScaleSchedule ScaleSchedule::default_schedule() { return from_sides({1, 2, 4, 8, 12, 16, 24, 32}); }

ScaleSchedule ScaleSchedule::with_last_ratios(const std::vector<double>& ratios, PruneStrategy strategy,
                                              RecoveryStrategy recovery, PruneParams params) const {
    if (ratios.size() > scales.size()) {
        throw InvalidInput("with_last_ratios: more ratios than scales");
    }
    ScaleSchedule out = *this;
    const std::size_t first = scales.size() - ratios.size();
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        PruneSpec& p = out.prune[first + i];
        p.ratio = ratios[i];
        p.strategy = ratios[i] == 0.0 ? PruneStrategy::none : strategy;
        p.recovery = recovery;
        p.params = params;
        p.params.ratio = ratios[i];
    }
    return out;
}

std::string_view to_string(CacheMode m) {
    return m == CacheMode::kept_only ? "kept_only" : "dense_recovered";
}

CacheMode parse_cache_mode(std::string_view name) {
    if (name == "kept_only") return CacheMode::kept_only;
    if (name == "dense_recovered") return CacheMode::dense_recovered;
    throw InvalidInput("unknown cache mode '" + std::string(name) + "' (expected kept_only or dense_recovered)");
}

FeatureGrid start_tokens(std::size_t batch, std::size_t channels, std::uint64_t input_seed) {
    FeatureGrid g(batch, 1, 1, channels);
    for (std::size_t b = 0; b < batch; ++b) {
        std::seed_seq seq{static_cast<std::uint32_t>(input_seed), static_cast<std::uint32_t>(input_seed >> 32),
                          static_cast<std::uint32_t>(b), 0x1297u};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> n(0.0, 1.0);
        for (auto& v : g.token(b, 0)) v = n(rng);
    }
    return g;
}

namespace {

std::uint64_t scale_seed(std::uint64_t seed, std::size_t scale) {
    return seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(scale));
}

KeptIndices all_indices(std::size_t batch, std::size_t tokens) {
    std::vector<Index> row(tokens);
    std::iota(row.begin(), row.end(), Index{0});
    return KeptIndices(batch, row);
}

void add_noise(FeatureGrid& g, const NoiseSpec& noise) {
    std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(noise.scale), 0x4015eu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> n(0.0, noise.sigma);
    for (auto& v : g.data()) v += n(rng);
}

FeatureGrid recover(const PruneSpec& spec, const SparseTokens& processed, const FeatureGrid& upsampled,
                    std::span<const Index> anchors) {
    switch (spec.recovery.kind) {
        case RecoveryKind::nearest_neighbor: return nn_propagate(processed);
        case RecoveryKind::cache_upsample: return scatter_tokens(processed, upsampled);
        case RecoveryKind::anchor_copy: return anchor_copy(processed, anchors);
    }
    throw InvalidInput("unknown recovery kind");
}

}  // namespace

PipelineResult run_pruned(const ToyModel& model, const ScaleSchedule& schedule, const PipelineOptions& options) {
    schedule.validate();
    if (options.batch == 0) {
        throw InvalidInput("run_pruned: batch must be positive");
    }
    if (options.noise && (options.noise->scale < 1 || options.noise->scale > schedule.size() ||
                          !(options.noise->sigma >= 0.0))) {
        throw InvalidInput("run_pruned: noise scale must lie in [1, K] and sigma must be >= 0");
    }
    const ToyModelConfig& cfg = model.config();
    const std::size_t B = options.batch;
    const std::size_t C = cfg.channels;

    PipelineResult result;
    std::vector<KvCache> caches(B, KvCache(cfg.depth, C));
    FeatureGrid previous = start_tokens(B, C, options.input_seed);

    for (std::size_t si = 0; si < schedule.size(); ++si) {
        const std::size_t scale = si + 1;
        const auto started = std::chrono::steady_clock::now();
        const ScaleShape shape = schedule.scales[si];
        const PruneSpec& spec = schedule.prune[si];

        ScaleRecord rec;
        rec.scale = scale;
        rec.shape = shape;
        rec.cache_tokens = caches.front().tokens();

        FeatureGrid dense;
        try {
            FeatureGrid upsampled = cache_upsample(previous, shape.height, shape.width);
            if (spec.skipped()) {
                rec.skipped = true;
                dense = std::move(upsampled);
            } else {
                const FeatureGrid x = model.embed(upsampled, scale);
                const std::size_t L = shape.tokens();
                std::vector<Index> anchors;
                KeptIndices kept;
                if (spec.ratio == 0.0) {
                    kept = all_indices(B, L);
                } else {
                    PruneParams params = spec.params;
                    params.ratio = spec.ratio;
                    params.rng_seed = scale_seed(params.rng_seed, scale);
                    const ScoreVector scores = score_tokens(x, spec.strategy, params);
                    const std::size_t k = keep_count(spec.ratio, L);
                    if (spec.recovery.kind == RecoveryKind::anchor_copy) {
                        anchors = anchor_grid(shape.height, shape.width, spec.recovery.anchor_stride);
                        kept.resize(B);
                        for (std::size_t b = 0; b < B; ++b) kept[b] = force_include(scores.row(b), k, anchors);
                    } else {
                        kept = top_k(scores, k);
                    }
                }
                if (spec.recovery.kind == RecoveryKind::anchor_copy && anchors.empty()) {
                    anchors = anchor_grid(shape.height, shape.width, spec.recovery.anchor_stride);
                }

                SparseTokens processed = gather_tokens(x, kept);
                for (std::size_t b = 0; b < B; ++b) {
                    TokenMatrix tokens(processed.kept, C);
                    std::copy_n(processed.data.begin() + static_cast<std::ptrdiff_t>(b * processed.kept * C),
                                processed.kept * C, tokens.data.begin());
                    std::vector<LayerKv> fresh;
                    const std::vector<double> positions = ToyModel::token_positions(kept[b], shape.height, shape.width);
                    const TokenMatrix out =
                        model.forward(std::move(tokens), positions, shape.height, shape.width, caches[b], fresh);
                    std::copy(out.data.begin(), out.data.end(),
                              processed.data.begin() + static_cast<std::ptrdiff_t>(b * processed.kept * C));
                    if (options.cache_mode == CacheMode::dense_recovered && processed.kept < L) {
                        // Every position caches the keys/values of its nearest kept token.
                        const auto assign = nearest_assignment(kept[b], shape.height, shape.width);
                        caches[b].append(fresh, ToyModel::token_positions(all_indices(1, L).front(), shape.height,
                                                                          shape.width),
                                         assign);
                    } else {
                        caches[b].append(fresh, positions);
                    }
                }
                rec.kept = processed.kept;
                dense = recover(spec, processed, upsampled, anchors);
                rec.kept_indices = std::move(kept);
            }
            if (options.noise && options.noise->scale == scale) {
                add_noise(dense, *options.noise);
            }
        } catch (const ScaleError&) {
            throw;
        } catch (const std::exception& e) {
            throw ScaleError(scale, e.what());
        }

        rec.flops = static_cast<double>(cfg.depth) * layer_flops(rec.kept, rec.cache_tokens, cfg, options.cond_len);
        rec.wall_ns =
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started).count();
        previous = dense;
        result.outputs.push_back(std::move(dense));
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::vector<FeatureGrid> run_dense(const ToyModel& model, const ScaleSchedule& schedule, std::uint64_t input_seed,
                                   std::size_t batch) {
    for (const auto& p : schedule.prune) {
        if (p.ratio != 0.0) {
            throw InvalidInput("run_dense: schedule must not prune (use run_pruned)");
        }
    }
    PipelineOptions options;
    options.batch = batch;
    options.input_seed = input_seed;
    return run_pruned(model, schedule, options).outputs;
}

FeatureGrid inject_noise(const ToyModel& model, const ScaleSchedule& schedule, std::uint64_t input_seed,
                         std::size_t scale, double sigma, std::uint64_t noise_seed, std::size_t batch) {
    PipelineOptions options;
    options.batch = batch;
    options.input_seed = input_seed;
    options.noise = NoiseSpec{scale, sigma, noise_seed};
    return run_pruned(model, schedule, options).final_output();
}

double layer_flops(std::size_t tokens, std::size_t cache, const ToyModelConfig& model, std::size_t cond_len) {
    const double L = static_cast<double>(tokens);
    const double C = static_cast<double>(model.channels);
    const double F = static_cast<double>(model.ffn_mult) * C;
    double macs = 2.0 * L * (L + static_cast<double>(cache)) * C + 4.0 * L * C * C + 2.0 * L * C * F;
    if (cond_len > 0) {
        macs += 2.0 * L * static_cast<double>(cond_len) * C + 2.0 * L * C * C;
    }
    return macs;
}

FlopReport flop_count(const ScaleSchedule& schedule, const ToyModelConfig& model, CacheMode cache_mode,
                      std::size_t cond_len) {
    schedule.validate();
    FlopReport report;
    std::size_t cache = 0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const PruneSpec& p = schedule.prune[s];
        const std::size_t L = schedule.scales[s].tokens();
        const std::size_t eff = p.skipped() ? 0 : (p.ratio == 0.0 ? L : keep_count(p.ratio, L));
        const double f = static_cast<double>(model.depth) * layer_flops(eff, cache, model, cond_len);
        report.per_scale.push_back(f);
        report.effective_tokens.push_back(eff);
        report.cache_tokens.push_back(cache);
        report.total += f;
        if (!p.skipped()) cache += (cache_mode == CacheMode::dense_recovered) ? L : eff;
    }
    return report;
}

}  // namespace stepvar

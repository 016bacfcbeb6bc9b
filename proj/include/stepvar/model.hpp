// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stepvar/feature_grid.hpp"

namespace stepvar {

struct ToyModelConfig {
    std::size_t depth = 4;
    std::size_t channels = 64;
    std::size_t heads = 4;
    std::size_t ffn_mult = 4;
    std::uint64_t weight_seed = 0;
    /// Head h subtracts h·locality × (query–key distance in current-scale cells)
    /// from its attention logits; head 0 stays global.
    double locality = 1.0;

    void validate() const;
    friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

/// Row-major rows × cols matrix of token features.
struct TokenMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    TokenMatrix() = default;
    TokenMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data.data() + i * cols, cols}; }
};

/// y = W x + b with W stored [out][in].
struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
};

struct LayerWeights {
    std::vector<double> norm1_gain;
    std::vector<double> norm2_gain;
    Linear query, key, value, proj;
    Linear ffn_up, ffn_down;
};

/// Keys and values of one layer for a block of tokens.
struct LayerKv {
    TokenMatrix keys;
    TokenMatrix values;
};

/// A contiguous run of cached (or current) keys/values seen by attention.
struct KvSegment {
    const double* keys = nullptr;
    const double* values = nullptr;
    const double* positions = nullptr;  ///< rows × (u, v), normalised to (0, 1)
    std::size_t rows = 0;
};

/// Distance penalty added to attention logits.
struct AttentionBias {
    std::span<const double> head_slopes;   ///< one per head
    std::span<const double> query_positions;  ///< rows × (u, v)
    double rows_extent = 1.0;  ///< converts Δu to current-scale cells
    double cols_extent = 1.0;  ///< converts Δv to current-scale cells
};

/// Per-layer keys/values of every completed scale.
class KvCache {
public:
    explicit KvCache(std::size_t depth = 0, std::size_t channels = 0);

    std::size_t tokens() const noexcept { return m_tokens; }
    const LayerKv& layer(std::size_t i) const { return m_layers.at(i); }
    /// tokens() × (u, v) positions of the cached tokens.
    const std::vector<double>& positions() const noexcept { return m_positions; }

    /// Appends rows `select[j]` of each layer's fresh keys/values, together
    /// with `positions` (one (u, v) pair per appended row). An empty `select`
    /// appends every row.
    void append(const std::vector<LayerKv>& fresh, std::span<const double> positions,
                std::span<const std::size_t> select = {});

private:
    std::vector<LayerKv> m_layers;
    std::vector<double> m_positions;
    std::size_t m_tokens = 0;
};

/**
 * Small pre-norm transformer with random weights drawn from `weight_seed`.
 * Each layer is RMSNorm → multi-head attention over (cache + current tokens)
 * → residual, then RMSNorm → GELU MLP → residual.
 */
class ToyModel {
public:
    explicit ToyModel(ToyModelConfig config);

    const ToyModelConfig& config() const noexcept { return m_config; }
    const std::vector<LayerWeights>& layers() const noexcept { return m_layers; }

    /// Adds the 2-D sinusoidal position code and the scale embedding of
    /// `scale` (1-based) to every token of `x`.
    FeatureGrid embed(FeatureGrid x, std::size_t scale) const;

    /// Position + scale code added to token (row, col) of an H×W map.
    std::vector<double> position_code(std::size_t row, std::size_t col, std::size_t height, std::size_t width,
                                      std::size_t scale) const;

    /// Normalised (u, v) centre of every listed token of an H×W map.
    static std::vector<double> token_positions(std::span<const Index> tokens, std::size_t height, std::size_t width);

    /// Attention slope of every head.
    std::vector<double> head_slopes() const;

    /**
     * Runs every layer over `x`, tokens of an H×W scale located at
     * `positions`. Tokens attend to all cached tokens and to all of `x`. The
     * keys/values computed for `x` are written to `fresh`.
     */
    TokenMatrix forward(TokenMatrix x, std::span<const double> positions, std::size_t height, std::size_t width,
                        const KvCache& cache, std::vector<LayerKv>& fresh) const;

private:
    ToyModelConfig m_config;
    std::vector<LayerWeights> m_layers;
};

namespace kernels {

void linear(const TokenMatrix& x, const Linear& w, TokenMatrix& y);
void rms_norm(const TokenMatrix& x, std::span<const double> gain, TokenMatrix& y);
void gelu_inplace(TokenMatrix& x);
/// Softmax attention of `q` over the concatenation of `context` segments.
void attention(const TokenMatrix& q, std::span<const KvSegment> context, std::size_t heads, const AttentionBias& bias,
               TokenMatrix& out);

}  // namespace kernels

}  // namespace stepvar

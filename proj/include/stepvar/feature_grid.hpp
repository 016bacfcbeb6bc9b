// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stepvar {

using Index = std::int64_t;

/// Per-batch kept token indices, each row ascending.
using KeptIndices = std::vector<std::vector<Index>>;

/**
 * A batch of token feature maps stored as [batch][token][channel], tokens in
 * row-major (row, col) order so that token l sits at (l / width, l % width).
 */
class FeatureGrid {
public:
    FeatureGrid() = default;
    FeatureGrid(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels);
    /// Takes ownership of `data`; throws InvalidInput on size mismatch or non-finite entries.
    FeatureGrid(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                std::vector<double> data);

    std::size_t batch() const noexcept { return m_batch; }
    std::size_t height() const noexcept { return m_height; }
    std::size_t width() const noexcept { return m_width; }
    std::size_t channels() const noexcept { return m_channels; }
    std::size_t tokens() const noexcept { return m_height * m_width; }

    std::span<double> token(std::size_t b, std::size_t l) noexcept {
        return {m_data.data() + (b * tokens() + l) * m_channels, m_channels};
    }
    std::span<const double> token(std::size_t b, std::size_t l) const noexcept {
        return {m_data.data() + (b * tokens() + l) * m_channels, m_channels};
    }
    /// All L×C values of one batch row.
    std::span<double> row(std::size_t b) noexcept {
        return {m_data.data() + b * tokens() * m_channels, tokens() * m_channels};
    }
    std::span<const double> row(std::size_t b) const noexcept {
        return {m_data.data() + b * tokens() * m_channels, tokens() * m_channels};
    }
    double& at(std::size_t b, std::size_t l, std::size_t c) noexcept {
        return m_data[(b * tokens() + l) * m_channels + c];
    }
    double at(std::size_t b, std::size_t l, std::size_t c) const noexcept {
        return m_data[(b * tokens() + l) * m_channels + c];
    }

    std::vector<double>& data() noexcept { return m_data; }
    const std::vector<double>& data() const noexcept { return m_data; }

    bool same_shape(const FeatureGrid& other) const noexcept;
    bool all_finite() const noexcept;

    friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

private:
    std::size_t m_batch = 0;
    std::size_t m_height = 0;
    std::size_t m_width = 0;
    std::size_t m_channels = 0;
    std::vector<double> m_data;
};

/// Gathered subset of a grid's tokens: data is [batch][k][channel].
struct SparseTokens {
    std::size_t batch = 0;
    std::size_t kept = 0;
    std::size_t channels = 0;
    std::size_t height = 0;  ///< source grid height
    std::size_t width = 0;   ///< source grid width
    std::vector<double> data;
    KeptIndices indices;

    std::span<double> token(std::size_t b, std::size_t j) noexcept {
        return {data.data() + (b * kept + j) * channels, channels};
    }
    std::span<const double> token(std::size_t b, std::size_t j) const noexcept {
        return {data.data() + (b * kept + j) * channels, channels};
    }

    /// Throws InvalidInput unless every row is strictly ascending and in range.
    void validate() const;
};

struct Coord {
    Index row = 0;
    Index col = 0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

struct CoordGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Coord> coords;
};

}  // namespace stepvar

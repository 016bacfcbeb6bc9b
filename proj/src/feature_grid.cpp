// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/feature_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stepvar/error.hpp"

namespace stepvar {

namespace {

void check_dims(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels) {
    if (batch == 0 || height == 0 || width == 0 || channels == 0) {
        throw InvalidInput("FeatureGrid dimensions must be positive (got B=" + std::to_string(batch) +
                           " H=" + std::to_string(height) + " W=" + std::to_string(width) +
                           " C=" + std::to_string(channels) + ")");
    }
}

}  // namespace

FeatureGrid::FeatureGrid(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels)
    : m_batch(batch), m_height(height), m_width(width), m_channels(channels) {
    check_dims(batch, height, width, channels);
    m_data.assign(batch * height * width * channels, 0.0);
}

FeatureGrid::FeatureGrid(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> data)
    : m_batch(batch), m_height(height), m_width(width), m_channels(channels), m_data(std::move(data)) {
    check_dims(batch, height, width, channels);
    if (m_data.size() != batch * height * width * channels) {
        throw InvalidInput("FeatureGrid data size " + std::to_string(m_data.size()) + " does not match B*H*W*C = " +
                           std::to_string(batch * height * width * channels));
    }
    if (!all_finite()) {
        throw InvalidInput("FeatureGrid data contains NaN or Inf");
    }
}

bool FeatureGrid::same_shape(const FeatureGrid& other) const noexcept {
    return m_batch == other.m_batch && m_height == other.m_height && m_width == other.m_width &&
           m_channels == other.m_channels;
}

bool FeatureGrid::all_finite() const noexcept {
    return std::all_of(m_data.begin(), m_data.end(), [](double v) { return std::isfinite(v); });
}

void SparseTokens::validate() const {
    const auto L = static_cast<Index>(height * width);
    if (indices.size() != batch) {
        throw InvalidInput("SparseTokens: expected " + std::to_string(batch) + " index rows, got " +
                           std::to_string(indices.size()));
    }
    if (kept > height * width) {
        throw InvalidInput("SparseTokens: k exceeds H*W");
    }
    if (data.size() != batch * kept * channels) {
        throw InvalidInput("SparseTokens: data size does not match B*k*C");
    }
    for (std::size_t b = 0; b < batch; ++b) {
        const auto& row = indices[b];
        if (row.size() != kept) {
            throw InvalidInput("SparseTokens: row " + std::to_string(b) + " has " + std::to_string(row.size()) +
                               " indices, expected " + std::to_string(kept));
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] < 0 || row[j] >= L) {
                throw InvalidInput("SparseTokens: index " + std::to_string(row[j]) + " out of range [0, " +
                                   std::to_string(L) + ")");
            }
            if (j > 0 && row[j] <= row[j - 1]) {
                throw InvalidInput("SparseTokens: indices must be strictly ascending (row " + std::to_string(b) +
                                   ", position " + std::to_string(j) + ")");
            }
        }
    }
}

}  // namespace stepvar

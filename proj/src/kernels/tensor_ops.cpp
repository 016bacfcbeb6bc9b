// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/tensor_ops.hpp"

#include <string>

#include "stepvar/error.hpp"

namespace stepvar {

namespace {

// Sums the in-bounds 3×3 window around every token, per channel, and records
// the window size. Summation order is fixed (row-major over the window).
void window_sums(const FeatureGrid& x, std::vector<double>& sums, std::vector<int>& counts) {
    const auto H = static_cast<long>(x.height());
    const auto W = static_cast<long>(x.width());
    const std::size_t C = x.channels();
    const std::size_t L = x.tokens();
    const std::size_t B = x.batch();
    sums.assign(B * L * C, 0.0);
    counts.assign(L, 0);

    for (long r = 0; r < H; ++r) {
        for (long c = 0; c < W; ++c) {
            const int rows = 1 + (r > 0) + (r + 1 < H);
            const int cols = 1 + (c > 0) + (c + 1 < W);
            counts[static_cast<std::size_t>(r * W + c)] = rows * cols;
        }
    }

#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < B; ++b) {
        for (long r = 0; r < H; ++r) {
            for (long c = 0; c < W; ++c) {
                double* out = sums.data() + (b * L + static_cast<std::size_t>(r * W + c)) * C;
                for (long dr = -1; dr <= 1; ++dr) {
                    const long rr = r + dr;
                    if (rr < 0 || rr >= H) continue;
                    for (long dc = -1; dc <= 1; ++dc) {
                        const long cc = c + dc;
                        if (cc < 0 || cc >= W) continue;
                        const auto src = x.token(b, static_cast<std::size_t>(rr * W + cc));
                        for (std::size_t ch = 0; ch < C; ++ch) out[ch] += src[ch];
                    }
                }
            }
        }
    }
}

}  // namespace

FeatureGrid center_tokens(const FeatureGrid& x) {
    const std::size_t B = x.batch();
    const std::size_t L = x.tokens();
    const std::size_t C = x.channels();
    const auto n = static_cast<double>(L);

    std::vector<double> sums(B * C, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < B; ++b) {
        double* s = sums.data() + b * C;
        for (std::size_t l = 0; l < L; ++l) {
            const auto t = x.token(b, l);
            for (std::size_t c = 0; c < C; ++c) s[c] += t[c];
        }
    }

    FeatureGrid out(B, x.height(), x.width(), C);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t l = 0; l < L; ++l) {
            const auto t = x.token(b, l);
            auto o = out.token(b, l);
            const double* s = sums.data() + b * C;
            for (std::size_t c = 0; c < C; ++c) o[c] = (n * t[c] - s[c]) / n;
        }
    }
    return out;
}

FeatureGrid avg_pool_3x3(const FeatureGrid& x) {
    std::vector<double> sums;
    std::vector<int> counts;
    window_sums(x, sums, counts);
    const std::size_t C = x.channels();
    const std::size_t L = x.tokens();
    const std::size_t total = x.batch() * L;
    FeatureGrid out(x.batch(), x.height(), x.width(), C);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        const double n = counts[i % L];
        for (std::size_t c = 0; c < C; ++c) out.data()[i * C + c] = sums[i * C + c] / n;
    }
    return out;
}

FeatureGrid high_pass_3x3(const FeatureGrid& x) {
    std::vector<double> sums;
    std::vector<int> counts;
    window_sums(x, sums, counts);
    const std::size_t C = x.channels();
    const std::size_t L = x.tokens();
    const std::size_t total = x.batch() * L;
    FeatureGrid out(x.batch(), x.height(), x.width(), C);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        const double n = counts[i % L];
        for (std::size_t c = 0; c < C; ++c) {
            out.data()[i * C + c] = (n * x.data()[i * C + c] - sums[i * C + c]) / n;
        }
    }
    return out;
}

SparseTokens gather_tokens(const FeatureGrid& x, const KeptIndices& indices) {
    SparseTokens out;
    out.batch = x.batch();
    out.channels = x.channels();
    out.height = x.height();
    out.width = x.width();
    out.kept = indices.empty() ? 0 : indices.front().size();
    out.indices = indices;
    out.data.assign(out.batch * out.kept * out.channels, 0.0);
    out.validate();

    for (std::size_t b = 0; b < out.batch; ++b) {
        for (std::size_t j = 0; j < out.kept; ++j) {
            const auto src = x.token(b, static_cast<std::size_t>(indices[b][j]));
            std::copy(src.begin(), src.end(), out.token(b, j).begin());
        }
    }
    return out;
}

FeatureGrid scatter_tokens(const SparseTokens& sparse, FeatureGrid base) {
    sparse.validate();
    if (base.batch() != sparse.batch || base.height() != sparse.height || base.width() != sparse.width ||
        base.channels() != sparse.channels) {
        throw InvalidInput("scatter_tokens: base grid shape does not match sparse source shape");
    }
    for (std::size_t b = 0; b < sparse.batch; ++b) {
        for (std::size_t j = 0; j < sparse.kept; ++j) {
            const auto src = sparse.token(b, j);
            std::copy(src.begin(), src.end(), base.token(b, static_cast<std::size_t>(sparse.indices[b][j])).begin());
        }
    }
    return base;
}

CoordGrid make_coord_grid(std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw InvalidInput("make_coord_grid: H and W must be positive");
    }
    CoordGrid grid{height, width, {}};
    grid.coords.reserve(height * width);
    for (std::size_t i = 0; i < height * width; ++i) {
        grid.coords.push_back({static_cast<Index>(i / width), static_cast<Index>(i % width)});
    }
    return grid;
}

}  // namespace stepvar

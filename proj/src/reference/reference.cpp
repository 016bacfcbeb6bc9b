// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/reference.hpp"

#include <cmath>
#include <limits>

#include "stepvar/error.hpp"

namespace stepvar::reference {

FeatureGrid center_tokens(const FeatureGrid& x) {
    const std::size_t L = x.tokens();
    const std::size_t C = x.channels();
    const auto n = static_cast<double>(L);
    FeatureGrid out(x.batch(), x.height(), x.width(), C);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        std::vector<double> sum(C, 0.0);
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t c = 0; c < C; ++c) sum[c] += x.at(b, l, c);
        }
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t c = 0; c < C; ++c) out.at(b, l, c) = (n * x.at(b, l, c) - sum[c]) / n;
        }
    }
    return out;
}

FeatureGrid high_pass_3x3(const FeatureGrid& x) {
    const auto H = static_cast<long>(x.height());
    const auto W = static_cast<long>(x.width());
    const std::size_t C = x.channels();
    FeatureGrid out(x.batch(), x.height(), x.width(), C);
    std::vector<double> sum(C);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (long r = 0; r < H; ++r) {
            for (long c = 0; c < W; ++c) {
                std::fill(sum.begin(), sum.end(), 0.0);
                int n = 0;
                for (long dr = -1; dr <= 1; ++dr) {
                    for (long dc = -1; dc <= 1; ++dc) {
                        const long rr = r + dr;
                        const long cc = c + dc;
                        if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                        ++n;
                        for (std::size_t ch = 0; ch < C; ++ch) sum[ch] += x.at(b, static_cast<std::size_t>(rr * W + cc), ch);
                    }
                }
                const auto l = static_cast<std::size_t>(r * W + c);
                for (std::size_t ch = 0; ch < C; ++ch) {
                    out.at(b, l, ch) = (n * x.at(b, l, ch) - sum[ch]) / n;
                }
            }
        }
    }
    return out;
}

ScoreVector textural_score(const FeatureGrid& x) {
    const FeatureGrid high = reference::high_pass_3x3(x);
    ScoreVector s(x.batch(), x.tokens());
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t l = 0; l < x.tokens(); ++l) {
            double acc = 0.0;
            for (const double h : high.token(b, l)) acc += h * h;
            s.row(b)[l] = acc;
        }
    }
    return s;
}

PrincipalDirections first_principal_direction(const FeatureGrid& centered, int iterations, std::uint64_t seed) {
    if (iterations < 1) {
        throw InvalidInput("first_principal_direction: iterations must be >= 1");
    }
    const std::size_t B = centered.batch();
    const std::size_t L = centered.tokens();
    const std::size_t C = centered.channels();
    PrincipalDirections out{B, C, std::vector<double>(B * C), std::vector<std::uint8_t>(B, 0)};
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> v = power_iteration_init(C, seed, b);
        std::vector<double> proj(L);
        std::vector<double> next(C);
        for (int t = 0; t < iterations; ++t) {
            for (std::size_t l = 0; l < L; ++l) {
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c) acc += centered.at(b, l, c) * v[c];
                proj[l] = acc;
            }
            for (std::size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::size_t l = 0; l < L; ++l) acc += centered.at(b, l, c) * proj[l];
                next[c] = acc;
            }
            double norm = 0.0;
            for (const double e : next) norm += e * e;
            norm = std::sqrt(norm);
            if (norm < kDegenerateNorm) {
                out.degenerate[b] = 1;
                v = power_iteration_init(C, seed, b);
                break;
            }
            for (std::size_t c = 0; c < C; ++c) v[c] = next[c] / norm;
        }
        for (std::size_t c = 0; c < C; ++c) out.vectors[b * C + c] = v[c];
    }
    return out;
}

ScoreVector structural_score(const FeatureGrid& x, const PruneParams& params) {
    params.validate();
    const FeatureGrid centered = reference::center_tokens(x);
    const PrincipalDirections pd = reference::first_principal_direction(centered, params.power_iters, params.rng_seed);
    ScoreVector s(x.batch(), x.tokens());
    for (std::size_t b = 0; b < x.batch(); ++b) {
        if (pd.degenerate[b]) continue;
        const auto v = pd.direction(b);
        for (std::size_t l = 0; l < x.tokens(); ++l) {
            double acc = 0.0;
            for (std::size_t c = 0; c < x.channels(); ++c) acc += centered.at(b, l, c) * v[c];
            s.row(b)[l] = std::abs(acc);
        }
    }
    return s;
}

std::vector<std::size_t> nearest_assignment(std::span<const Index> sources, std::size_t height, std::size_t width) {
    if (sources.empty()) {
        throw InvalidInput("nearest_assignment: no source tokens");
    }
    const auto W = static_cast<Index>(width);
    std::vector<std::size_t> assign(height * width);
    for (std::size_t i = 0; i < assign.size(); ++i) {
        const Index r = static_cast<Index>(i) / W;
        const Index c = static_cast<Index>(i) % W;
        Index best = std::numeric_limits<Index>::max();
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const Index dr = r - sources[j] / W;
            const Index dc = c - sources[j] % W;
            if (dr * dr + dc * dc < best) {
                best = dr * dr + dc * dc;
                assign[i] = j;
            }
        }
    }
    return assign;
}

void linear(const TokenMatrix& x, const Linear& w, TokenMatrix& y) {
    y = TokenMatrix(x.rows, w.out);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t o = 0; o < w.out; ++o) {
            double acc = w.bias[o];
            for (std::size_t k = 0; k < w.in; ++k) acc += w.weight[o * w.in + k] * x.data[i * w.in + k];
            y.data[i * w.out + o] = acc;
        }
    }
}

void attention(const TokenMatrix& q, std::span<const KvSegment> context, std::size_t heads, const AttentionBias& bias,
               TokenMatrix& out) {
    const std::size_t C = q.cols;
    const std::size_t dh = C / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    out = TokenMatrix(q.rows, C);
    std::vector<double> logits;
    for (std::size_t i = 0; i < q.rows; ++i) {
        for (std::size_t h = 0; h < heads; ++h) {
            logits.clear();
            double max_logit = -std::numeric_limits<double>::infinity();
            for (const auto& seg : context) {
                for (std::size_t j = 0; j < seg.rows; ++j) {
                    double acc = 0.0;
                    for (std::size_t d = 0; d < dh; ++d) acc += q.data[i * C + h * dh + d] * seg.keys[j * C + h * dh + d];
                    const double du = (bias.query_positions[2 * i] - seg.positions[2 * j]) * bias.rows_extent;
                    const double dv = (bias.query_positions[2 * i + 1] - seg.positions[2 * j + 1]) * bias.cols_extent;
                    logits.push_back(acc * scale - bias.head_slopes[h] * std::sqrt(du * du + dv * dv));
                    max_logit = std::max(max_logit, logits.back());
                }
            }
            double denom = 0.0;
            for (auto& e : logits) {
                e = std::exp(e - max_logit);
                denom += e;
            }
            std::size_t m = 0;
            for (const auto& seg : context) {
                for (std::size_t j = 0; j < seg.rows; ++j, ++m) {
                    const double p = logits[m] / denom;
                    for (std::size_t d = 0; d < dh; ++d) out.data[i * C + h * dh + d] += p * seg.values[j * C + h * dh + d];
                }
            }
        }
    }
}

}  // namespace stepvar::reference

// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stepvar/model.hpp"

namespace stepvar::kernels {

void linear(const TokenMatrix& x, const Linear& w, TokenMatrix& y) {
    y.rows = x.rows;
    y.cols = w.out;
    y.data.assign(x.rows * w.out, 0.0);
    // [in][out] copy so the inner loop runs over independent outputs; each
    // output still accumulates bias first, then inputs in ascending order.
    std::vector<double> wt(w.in * w.out);
    for (std::size_t o = 0; o < w.out; ++o) {
        for (std::size_t k = 0; k < w.in; ++k) wt[k * w.out + o] = w.weight[o * w.in + k];
    }
    const std::size_t n = x.rows;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data.data() + i * w.in;
        double* yi = y.data.data() + i * w.out;
        for (std::size_t o = 0; o < w.out; ++o) yi[o] = w.bias[o];
        for (std::size_t k = 0; k < w.in; ++k) {
            const double xk = xi[k];
            const double* row = wt.data() + k * w.out;
            for (std::size_t o = 0; o < w.out; ++o) yi[o] += row[o] * xk;
        }
    }
}

void rms_norm(const TokenMatrix& x, std::span<const double> gain, TokenMatrix& y) {
    y.rows = x.rows;
    y.cols = x.cols;
    y.data.resize(x.data.size());
    const std::size_t n = x.rows;
    const std::size_t C = x.cols;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data.data() + i * C;
        double ss = 0.0;
        for (std::size_t c = 0; c < C; ++c) ss += xi[c] * xi[c];
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(C) + 1e-6);
        double* yi = y.data.data() + i * C;
        for (std::size_t c = 0; c < C; ++c) yi[c] = xi[c] * inv * gain[c];
    }
}

void gelu_inplace(TokenMatrix& x) {
    const double k = std::sqrt(2.0 / 3.14159265358979323846);
    const std::size_t n = x.data.size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.data[i];
        x.data[i] = 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v)));
    }
}

void attention(const TokenMatrix& q, std::span<const KvSegment> context, std::size_t heads, const AttentionBias& bias,
               TokenMatrix& out) {
    const std::size_t C = q.cols;
    const std::size_t dh = C / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::size_t total = 0;
    for (const auto& seg : context) total += seg.rows;

    // Keys as [head][dim][context row] so logits for all rows accumulate
    // together, dimension by dimension.
    std::vector<double> keys_t(heads * dh * total);
    std::vector<double> values(total * C);
    std::vector<double> key_pos(total * 2);
    {
        std::size_t m = 0;
        for (const auto& seg : context) {
            for (std::size_t j = 0; j < seg.rows; ++j, ++m) {
                for (std::size_t c = 0; c < C; ++c) {
                    keys_t[c * total + m] = seg.keys[j * C + c];
                    values[m * C + c] = seg.values[j * C + c];
                }
                key_pos[2 * m] = seg.positions[2 * j];
                key_pos[2 * m + 1] = seg.positions[2 * j + 1];
            }
        }
    }

    out.rows = q.rows;
    out.cols = C;
    out.data.assign(q.rows * C, 0.0);
    const std::size_t n = q.rows;

#pragma omp parallel
    {
        std::vector<double> logits(total);
        std::vector<double> dist(total);
#pragma omp for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            const double qu = bias.query_positions[2 * i];
            const double qv = bias.query_positions[2 * i + 1];
            for (std::size_t m = 0; m < total; ++m) {
                const double du = (qu - key_pos[2 * m]) * bias.rows_extent;
                const double dv = (qv - key_pos[2 * m + 1]) * bias.cols_extent;
                dist[m] = std::sqrt(du * du + dv * dv);
            }
            for (std::size_t h = 0; h < heads; ++h) {
                const double* qi = q.data.data() + i * C + h * dh;
                const double slope = bias.head_slopes[h];
                std::fill(logits.begin(), logits.end(), 0.0);
                for (std::size_t d = 0; d < dh; ++d) {
                    const double qd = qi[d];
                    const double* kd = keys_t.data() + (h * dh + d) * total;
                    for (std::size_t m = 0; m < total; ++m) logits[m] += qd * kd[m];
                }
                double max_logit = -std::numeric_limits<double>::infinity();
                for (std::size_t m = 0; m < total; ++m) {
                    logits[m] = logits[m] * scale - slope * dist[m];
                    max_logit = std::max(max_logit, logits[m]);
                }
                double denom = 0.0;
                for (std::size_t m = 0; m < total; ++m) {
                    logits[m] = std::exp(logits[m] - max_logit);
                    denom += logits[m];
                }
                double* oi = out.data.data() + i * C + h * dh;
                for (std::size_t m = 0; m < total; ++m) {
                    const double p = logits[m] / denom;
                    const double* vm = values.data() + m * C + h * dh;
                    for (std::size_t d = 0; d < dh; ++d) oi[d] += p * vm[d];
                }
            }
        }
    }
}

}  // namespace stepvar::kernels

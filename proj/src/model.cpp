// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "stepvar/error.hpp"

namespace stepvar {

namespace {

constexpr double kPi = 3.14159265358979323846;

Linear make_linear(std::size_t in, std::size_t out, double gain, std::mt19937_64& rng) {
    Linear l{in, out, std::vector<double>(in * out), std::vector<double>(out)};
    std::normal_distribution<double> w(0.0, gain / std::sqrt(static_cast<double>(in)));
    std::normal_distribution<double> b(0.0, 0.02);
    for (auto& v : l.weight) v = w(rng);
    for (auto& v : l.bias) v = b(rng);
    return l;
}

}  // namespace

void ToyModelConfig::validate() const {
    if (depth == 0 || channels == 0 || heads == 0 || ffn_mult == 0) {
        throw InvalidInput("model: depth, channels, heads and ffn_mult must be positive");
    }
    if (!(locality >= 0.0) || !std::isfinite(locality)) {
        throw InvalidInput("model: locality must be a finite nonnegative number");
    }
    if (channels % heads != 0) {
        throw InvalidInput("model: channels (" + std::to_string(channels) + ") must be divisible by heads (" +
                           std::to_string(heads) + ")");
    }
}

KvCache::KvCache(std::size_t depth, std::size_t channels) : m_layers(depth) {
    for (auto& l : m_layers) {
        l.keys = TokenMatrix(0, channels);
        l.values = TokenMatrix(0, channels);
    }
}

void KvCache::append(const std::vector<LayerKv>& fresh, std::span<const double> positions,
                     std::span<const std::size_t> select) {
    if (fresh.size() != m_layers.size()) {
        throw InvalidInput("KvCache::append: layer count mismatch");
    }
    const std::size_t added = select.empty() ? (fresh.empty() ? 0 : fresh.front().keys.rows) : select.size();
    if (positions.size() != 2 * added) {
        throw InvalidInput("KvCache::append: expected one (u, v) position per appended token");
    }
    for (std::size_t i = 0; i < m_layers.size(); ++i) {
        auto push = [&](TokenMatrix& dst, const TokenMatrix& src) {
            if (select.empty()) {
                dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
            } else {
                for (const std::size_t r : select) {
                    const auto row = src.row(r);
                    dst.data.insert(dst.data.end(), row.begin(), row.end());
                }
            }
            dst.rows += added;
        };
        push(m_layers[i].keys, fresh[i].keys);
        push(m_layers[i].values, fresh[i].values);
    }
    m_positions.insert(m_positions.end(), positions.begin(), positions.end());
    m_tokens += added;
}

ToyModel::ToyModel(ToyModelConfig config) : m_config(config) {
    m_config.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(config.weight_seed),
                      static_cast<std::uint32_t>(config.weight_seed >> 32), 0xa11ce5u};
    std::mt19937_64 rng(seq);
    const std::size_t C = config.channels;
    const std::size_t F = config.channels * config.ffn_mult;
    m_layers.reserve(config.depth);
    for (std::size_t i = 0; i < config.depth; ++i) {
        LayerWeights lw;
        lw.norm1_gain.assign(C, 1.0);
        lw.norm2_gain.assign(C, 1.0);
        lw.query = make_linear(C, C, 1.0, rng);
        lw.key = make_linear(C, C, 1.0, rng);
        lw.value = make_linear(C, C, 1.0, rng);
        lw.proj = make_linear(C, C, 0.5, rng);
        lw.ffn_up = make_linear(C, F, 1.0, rng);
        lw.ffn_down = make_linear(F, C, 0.5, rng);
        m_layers.push_back(std::move(lw));
    }
}

std::vector<double> ToyModel::position_code(std::size_t row, std::size_t col, std::size_t height, std::size_t width,
                                            std::size_t scale) const {
    const std::size_t C = m_config.channels;
    std::vector<double> code(C);
    const double u = (static_cast<double>(row) + 0.5) / static_cast<double>(height);
    const double v = (static_cast<double>(col) + 0.5) / static_cast<double>(width);
    const std::size_t half = C / 2;
    for (std::size_t c = 0; c < C; ++c) {
        const bool is_row = c < half;
        const std::size_t j = is_row ? c : c - half;
        const double freq = kPi * static_cast<double>(1 + (j / 2) % 4);
        const double arg = freq * (is_row ? u : v);
        code[c] = 0.5 * ((j % 2 == 0) ? std::sin(arg) : std::cos(arg));
    }
    std::seed_seq seq{static_cast<std::uint32_t>(m_config.weight_seed), static_cast<std::uint32_t>(scale), 0x5ca1eu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> n(0.0, 0.25);
    for (auto& e : code) e += n(rng);
    return code;
}

FeatureGrid ToyModel::embed(FeatureGrid x, std::size_t scale) const {
    if (x.channels() != m_config.channels) {
        throw InvalidInput("embed: grid has " + std::to_string(x.channels()) + " channels, model expects " +
                           std::to_string(m_config.channels));
    }
    for (std::size_t r = 0; r < x.height(); ++r) {
        for (std::size_t c = 0; c < x.width(); ++c) {
            const auto code = position_code(r, c, x.height(), x.width(), scale);
            for (std::size_t b = 0; b < x.batch(); ++b) {
                auto t = x.token(b, r * x.width() + c);
                for (std::size_t ch = 0; ch < t.size(); ++ch) t[ch] += code[ch];
            }
        }
    }
    return x;
}

std::vector<double> ToyModel::token_positions(std::span<const Index> tokens, std::size_t height, std::size_t width) {
    std::vector<double> pos;
    pos.reserve(tokens.size() * 2);
    const auto W = static_cast<Index>(width);
    for (const Index t : tokens) {
        pos.push_back((static_cast<double>(t / W) + 0.5) / static_cast<double>(height));
        pos.push_back((static_cast<double>(t % W) + 0.5) / static_cast<double>(width));
    }
    return pos;
}

std::vector<double> ToyModel::head_slopes() const {
    std::vector<double> slopes(m_config.heads);
    for (std::size_t h = 0; h < slopes.size(); ++h) slopes[h] = m_config.locality * static_cast<double>(h);
    return slopes;
}

TokenMatrix ToyModel::forward(TokenMatrix x, std::span<const double> positions, std::size_t height, std::size_t width,
                              const KvCache& cache, std::vector<LayerKv>& fresh) const {
    if (x.cols != m_config.channels) {
        throw InvalidInput("forward: token width does not match model channels");
    }
    if (positions.size() != 2 * x.rows) {
        throw InvalidInput("forward: expected one (u, v) position per token");
    }
    const std::vector<double> slopes = head_slopes();
    const AttentionBias bias{slopes, positions, static_cast<double>(height), static_cast<double>(width)};
    fresh.assign(m_layers.size(), LayerKv{});
    TokenMatrix h, q, a, o, up, down;
    for (std::size_t i = 0; i < m_layers.size(); ++i) {
        const LayerWeights& lw = m_layers[i];
        kernels::rms_norm(x, lw.norm1_gain, h);
        kernels::linear(h, lw.query, q);
        kernels::linear(h, lw.key, fresh[i].keys);
        kernels::linear(h, lw.value, fresh[i].values);

        const LayerKv& cached = cache.layer(i);
        const KvSegment segments[] = {
            {cached.keys.data.data(), cached.values.data.data(), cache.positions().data(), cached.keys.rows},
            {fresh[i].keys.data.data(), fresh[i].values.data.data(), positions.data(), fresh[i].keys.rows},
        };
        kernels::attention(q, segments, m_config.heads, bias, a);
        kernels::linear(a, lw.proj, o);
        for (std::size_t j = 0; j < x.data.size(); ++j) x.data[j] += o.data[j];

        kernels::rms_norm(x, lw.norm2_gain, h);
        kernels::linear(h, lw.ffn_up, up);
        kernels::gelu_inplace(up);
        kernels::linear(up, lw.ffn_down, down);
        for (std::size_t j = 0; j < x.data.size(); ++j) x.data[j] += down.data[j];
    }
    return x;
}

}  // namespace stepvar

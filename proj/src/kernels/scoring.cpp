// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "stepvar/error.hpp"
#include "stepvar/tensor_ops.hpp"

namespace stepvar {

void PruneParams::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw InvalidInput("prune ratio must lie in [0, 1], got " + std::to_string(ratio));
    }
    if (!(w_str >= 0.0) || !std::isfinite(w_str)) {
        throw InvalidInput("w_str must be a finite nonnegative number");
    }
    if (power_iters < 1) {
        throw InvalidInput("power_iters must be >= 1");
    }
}

std::vector<double> power_iteration_init(std::size_t channels, std::uint64_t seed, std::size_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(channels);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& e : v) {
            e = normal(rng);
            norm += e * e;
        }
    }
    norm = std::sqrt(norm);
    for (auto& e : v) e /= norm;
    return v;
}

PrincipalDirections first_principal_direction(const FeatureGrid& centered, int iterations, std::uint64_t seed,
                                              std::vector<double>* rayleigh) {
    if (iterations < 1) {
        throw InvalidInput("first_principal_direction: iterations must be >= 1");
    }
    const std::size_t B = centered.batch();
    const std::size_t L = centered.tokens();
    const std::size_t C = centered.channels();

    PrincipalDirections out{B, C, std::vector<double>(B * C), std::vector<std::uint8_t>(B, 0)};
    if (rayleigh) rayleigh->assign(B * static_cast<std::size_t>(iterations), 0.0);

    std::vector<double> proj(L);
    std::vector<double> next(C);
    for (std::size_t b = 0; b < B; ++b) {
        const double* X = centered.row(b).data();
        std::vector<double> v = power_iteration_init(C, seed, b);

        for (int t = 0; t < iterations; ++t) {
#pragma omp parallel for schedule(static)
            for (std::size_t l = 0; l < L; ++l) {
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c) acc += X[l * C + c] * v[c];
                proj[l] = acc;
            }
#pragma omp parallel for schedule(static)
            for (std::size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::size_t l = 0; l < L; ++l) acc += X[l * C + c] * proj[l];
                next[c] = acc;
            }
            double norm = 0.0;
            for (std::size_t c = 0; c < C; ++c) norm += next[c] * next[c];
            norm = std::sqrt(norm);
            if (norm < kDegenerateNorm) {
                out.degenerate[b] = 1;
                v = power_iteration_init(C, seed, b);
                break;
            }
            for (std::size_t c = 0; c < C; ++c) v[c] = next[c] / norm;

            if (rayleigh) {
                double q = 0.0;
                for (std::size_t l = 0; l < L; ++l) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c) acc += X[l * C + c] * v[c];
                    q += acc * acc;
                }
                (*rayleigh)[b * static_cast<std::size_t>(iterations) + static_cast<std::size_t>(t)] = q;
            }
        }
        std::copy(v.begin(), v.end(), out.vectors.begin() + static_cast<std::ptrdiff_t>(b * C));
    }
    return out;
}

ScoreVector structural_score(const FeatureGrid& x, const PruneParams& params) {
    params.validate();
    const FeatureGrid centered = center_tokens(x);
    const PrincipalDirections pd = first_principal_direction(centered, params.power_iters, params.rng_seed);
    const std::size_t B = x.batch();
    const std::size_t L = x.tokens();
    const std::size_t C = x.channels();

    ScoreVector s(B, L);
    for (std::size_t b = 0; b < B; ++b) {
        if (pd.degenerate[b]) continue;
        const auto v = pd.direction(b);
        auto out = s.row(b);
#pragma omp parallel for schedule(static)
        for (std::size_t l = 0; l < L; ++l) {
            const auto t = centered.token(b, l);
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += t[c] * v[c];
            out[l] = std::abs(acc);
        }
    }
    return s;
}

ScoreVector textural_score(const FeatureGrid& x) {
    const FeatureGrid high = high_pass_3x3(x);
    const std::size_t total = x.batch() * x.tokens();
    const std::size_t C = x.channels();
    ScoreVector s(x.batch(), x.tokens());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double h = high.data()[i * C + c];
            acc += h * h;
        }
        s.values[i] = acc;
    }
    return s;
}

ScoreVector l2norm_score(const FeatureGrid& x) {
    const FeatureGrid centered = center_tokens(x);
    const std::size_t total = x.batch() * x.tokens();
    const std::size_t C = x.channels();
    ScoreVector s(x.batch(), x.tokens());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < total; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double d = centered.data()[i * C + c];
            acc += d * d;
        }
        s.values[i] = std::sqrt(acc);
    }
    return s;
}

ScoreVector random_score(std::size_t batch, std::size_t tokens, std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7a11u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    ScoreVector s(batch, tokens);
    for (auto& v : s.values) v = uniform(rng);
    return s;
}

std::size_t keep_count(double ratio, std::size_t tokens) {
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw InvalidInput("keep_count: ratio must lie in [0, 1) (r = 1 means the stage is skipped), got " +
                           std::to_string(ratio));
    }
    // The slack absorbs representation error in (1 − r), e.g. (1 − 0.9)·20 = 1.9999999999999996.
    const double raw = (1.0 - ratio) * static_cast<double>(tokens);
    const auto k = static_cast<std::size_t>(std::floor(raw + 1e-9));
    return std::clamp<std::size_t>(k, 1, tokens);
}

KeptIndices top_k(const ScoreVector& scores, std::size_t k) {
    if (k == 0 || k > scores.tokens) {
        throw InvalidInput("top_k: k must lie in [1, L], got " + std::to_string(k));
    }
    KeptIndices kept(scores.batch);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < scores.batch; ++b) {
        const auto s = scores.row(b);
        std::vector<Index> order(scores.tokens);
        std::iota(order.begin(), order.end(), Index{0});
        const auto better = [&](Index a, Index c) {
            const double sa = s[static_cast<std::size_t>(a)];
            const double sc = s[static_cast<std::size_t>(c)];
            return sa > sc || (sa == sc && a < c);
        };
        if (k < order.size()) {
            std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), better);
        }
        order.resize(k);
        std::sort(order.begin(), order.end());
        kept[b] = std::move(order);
    }
    return kept;
}

namespace {

Selection select_with(const FeatureGrid& x, ScoreVector scores, double ratio) {
    const std::size_t k = keep_count(ratio, x.tokens());
    Selection sel{gather_tokens(x, top_k(scores, k)), std::move(scores)};
    return sel;
}

}  // namespace

Selection joint_select(const FeatureGrid& x, const PruneParams& params) {
    params.validate();
    return select_with(x, score_tokens(x, PruneStrategy::stepvar, params), params.ratio);
}

std::string_view to_string(PruneStrategy s) {
    switch (s) {
        case PruneStrategy::stepvar: return "stepvar";
        case PruneStrategy::hf_only: return "hf_only";
        case PruneStrategy::l2norm: return "l2norm";
        case PruneStrategy::random: return "random";
        case PruneStrategy::none: return "none";
    }
    return "unknown";
}

PruneStrategy parse_prune_strategy(std::string_view name) {
    for (auto s : {PruneStrategy::stepvar, PruneStrategy::hf_only, PruneStrategy::l2norm, PruneStrategy::random,
                   PruneStrategy::none}) {
        if (to_string(s) == name) return s;
    }
    throw InvalidInput("unknown prune strategy '" + std::string(name) +
                       "' (expected stepvar, hf_only, l2norm, random or none)");
}

ScoreVector score_tokens(const FeatureGrid& x, PruneStrategy strategy, const PruneParams& params) {
    switch (strategy) {
        case PruneStrategy::stepvar: {
            ScoreVector total = structural_score(x, params);
            const ScoreVector txt = textural_score(x);
            for (std::size_t i = 0; i < total.values.size(); ++i) {
                total.values[i] = params.w_str * total.values[i] + txt.values[i];
            }
            return total;
        }
        case PruneStrategy::hf_only: return textural_score(x);
        case PruneStrategy::l2norm: return l2norm_score(x);
        case PruneStrategy::random: return random_score(x.batch(), x.tokens(), params.rng_seed);
        case PruneStrategy::none: return ScoreVector(x.batch(), x.tokens());
    }
    throw InvalidInput("score_tokens: unknown strategy");
}

Selection select_tokens(const FeatureGrid& x, PruneStrategy strategy, const PruneParams& params) {
    params.validate();
    if (strategy == PruneStrategy::none && params.ratio != 0.0) {
        throw InvalidInput("strategy 'none' requires ratio 0");
    }
    return select_with(x, score_tokens(x, strategy, params), params.ratio);
}

}  // namespace stepvar

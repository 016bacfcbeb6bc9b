// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace oracle {

using stepvar::TokenMatrix;

FeatureGrid random_grid(std::size_t batch, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureGrid g(batch, h, w, c);
    for (auto& v : g.data()) v = u(rng);
    return g;
}

FeatureGrid dyadic_grid(std::size_t batch, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(-64, 64);
    FeatureGrid g(batch, h, w, c);
    for (auto& v : g.data()) v = u(rng) / 16.0;
    return g;
}

FeatureGrid spiked_grid(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed, double spike_lo,
                        double spike_hi) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> amp(spike_lo, spike_hi);
    std::vector<double> dir(c);
    for (auto& d : dir) d = n(rng);
    const double norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    for (auto& d : dir) d /= norm;
    const double a = amp(rng);
    FeatureGrid g(1, h, w, c);
    for (std::size_t l = 0; l < h * w; ++l) {
        const double z = a * n(rng);
        for (std::size_t k = 0; k < c; ++k) g.at(0, l, k) = z * dir[k] + n(rng);
    }
    return g;
}

FeatureGrid centered(const FeatureGrid& x) {
    FeatureGrid out = x;
    const std::size_t L = x.tokens();
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t c = 0; c < x.channels(); ++c) {
            double mean = 0.0;
            for (std::size_t l = 0; l < L; ++l) mean += x.at(b, l, c);
            mean /= static_cast<double>(L);
            for (std::size_t l = 0; l < L; ++l) out.at(b, l, c) = x.at(b, l, c) - mean;
        }
    }
    return out;
}

namespace {

Eigen::MatrixXd as_matrix(const FeatureGrid& x, std::size_t b) {
    Eigen::MatrixXd m(x.tokens(), x.channels());
    for (std::size_t l = 0; l < x.tokens(); ++l)
        for (std::size_t c = 0; c < x.channels(); ++c) m(l, c) = x.at(b, l, c);
    return m;
}

}  // namespace

std::vector<double> leading_direction(const FeatureGrid& centered_x, std::size_t b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_matrix(centered_x, b), Eigen::ComputeThinV);
    const Eigen::VectorXd v = svd.matrixV().col(0);
    return {v.data(), v.data() + v.size()};
}

double covariance_gap(const FeatureGrid& centered_x, std::size_t b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(as_matrix(centered_x, b));
    const auto& s = svd.singularValues();
    if (s.size() < 2 || s(0) == 0.0) return 0.0;
    return (s(0) * s(0) - s(1) * s(1)) / (s(0) * s(0));
}

FeatureGrid box_mean(const FeatureGrid& x) {
    FeatureGrid out(x.batch(), x.height(), x.width(), x.channels());
    const auto H = static_cast<long>(x.height());
    const auto W = static_cast<long>(x.width());
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (long r = 0; r < H; ++r) {
            for (long c = 0; c < W; ++c) {
                for (std::size_t ch = 0; ch < x.channels(); ++ch) {
                    double sum = 0.0;
                    int n = 0;
                    for (long dr = -1; dr <= 1; ++dr) {
                        for (long dc = -1; dc <= 1; ++dc) {
                            const long rr = r + dr, cc = c + dc;
                            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                            sum += x.at(b, static_cast<std::size_t>(rr * W + cc), ch);
                            ++n;
                        }
                    }
                    out.at(b, static_cast<std::size_t>(r * W + c), ch) = sum / n;
                }
            }
        }
    }
    return out;
}

std::vector<double> textural(const FeatureGrid& x) {
    const FeatureGrid mean = box_mean(x);
    std::vector<double> s(x.batch() * x.tokens(), 0.0);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t l = 0; l < x.tokens(); ++l) {
            for (std::size_t c = 0; c < x.channels(); ++c) {
                const double d = x.at(b, l, c) - mean.at(b, l, c);
                s[b * x.tokens() + l] += d * d;
            }
        }
    }
    return s;
}

std::vector<double> projection_magnitude(const FeatureGrid& centered_x, const std::vector<std::vector<double>>& dirs) {
    std::vector<double> s(centered_x.batch() * centered_x.tokens());
    for (std::size_t b = 0; b < centered_x.batch(); ++b) {
        for (std::size_t l = 0; l < centered_x.tokens(); ++l) {
            double p = 0.0;
            for (std::size_t c = 0; c < centered_x.channels(); ++c) p += centered_x.at(b, l, c) * dirs[b][c];
            s[b * centered_x.tokens() + l] = std::abs(p);
        }
    }
    return s;
}

std::vector<Index> sort_select(const std::vector<double>& scores, std::size_t k) {
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

std::size_t keep_count_tenths(int tenths, std::size_t tokens) {
    const std::size_t k = static_cast<std::size_t>(10 - tenths) * tokens / 10;
    return std::max<std::size_t>(k, 1);
}

std::vector<std::size_t> voronoi(const std::vector<Index>& kept, std::size_t h, std::size_t w) {
    std::vector<std::size_t> owner(h * w);
    const auto W = static_cast<Index>(w);
    for (std::size_t cell = 0; cell < h * w; ++cell) {
        const Index r = static_cast<Index>(cell) / W, c = static_cast<Index>(cell) % W;
        Index best = std::numeric_limits<Index>::max();
        for (std::size_t j = 0; j < kept.size(); ++j) {
            const Index dr = kept[j] / W - r, dc = kept[j] % W - c;
            const Index d = dr * dr + dc * dc;
            if (d < best) {
                best = d;
                owner[cell] = j;
            }
        }
    }
    return owner;
}

std::vector<std::size_t> resize_map(std::size_t src, std::size_t dst) {
    std::vector<std::size_t> m(dst);
    for (std::size_t o = 0; o < dst; ++o) m[o] = o * src / dst;
    return m;
}

namespace {

TokenMatrix apply(const stepvar::Linear& w, const TokenMatrix& x) {
    TokenMatrix y(x.rows, w.out);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t o = 0; o < w.out; ++o) {
            double acc = w.bias[o];
            for (std::size_t k = 0; k < w.in; ++k) acc += w.weight[o * w.in + k] * x.data[i * w.in + k];
            y.data[i * w.out + o] = acc;
        }
    }
    return y;
}

TokenMatrix rms(const TokenMatrix& x, const std::vector<double>& gain) {
    TokenMatrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double ss = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) ss += x.data[i * x.cols + c] * x.data[i * x.cols + c];
        const double denom = std::sqrt(ss / static_cast<double>(x.cols) + 1e-6);
        for (std::size_t c = 0; c < x.cols; ++c) y.data[i * x.cols + c] = x.data[i * x.cols + c] / denom * gain[c];
    }
    return y;
}

double gelu(double v) {
    return 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
}

}  // namespace

std::vector<TokenMatrix> full_context_forward(const stepvar::ToyModel& model, const std::vector<TokenMatrix>& inputs,
                                              const std::vector<std::vector<Index>>& kept,
                                              const std::vector<stepvar::ScaleShape>& shapes) {
    const auto& cfg = model.config();
    const std::size_t C = cfg.channels, heads = cfg.heads, dh = C / heads;
    const auto slopes = model.head_slopes();

    std::vector<TokenMatrix> outputs;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        // Sequence = every block 0..s; block[i] says which scale token i came from.
        std::size_t N = 0;
        for (std::size_t t = 0; t <= s; ++t) N += inputs[t].rows;
        TokenMatrix x(N, C);
        std::vector<std::size_t> block(N);
        std::vector<double> u(N), v(N);
        std::size_t at = 0;
        for (std::size_t t = 0; t <= s; ++t) {
            for (std::size_t j = 0; j < inputs[t].rows; ++j, ++at) {
                std::copy_n(inputs[t].data.begin() + static_cast<std::ptrdiff_t>(j * C), C,
                            x.data.begin() + static_cast<std::ptrdiff_t>(at * C));
                block[at] = t;
                const auto W = static_cast<Index>(shapes[t].width);
                u[at] = (static_cast<double>(kept[t][j] / W) + 0.5) / static_cast<double>(shapes[t].height);
                v[at] = (static_cast<double>(kept[t][j] % W) + 0.5) / static_cast<double>(shapes[t].width);
            }
        }

        for (const auto& lw : model.layers()) {
            const TokenMatrix h = rms(x, lw.norm1_gain);
            const TokenMatrix q = apply(lw.query, h), k = apply(lw.key, h), val = apply(lw.value, h);
            TokenMatrix a(N, C);
            for (std::size_t i = 0; i < N; ++i) {
                const double Hq = static_cast<double>(shapes[block[i]].height);
                const double Wq = static_cast<double>(shapes[block[i]].width);
                for (std::size_t hd = 0; hd < heads; ++hd) {
                    std::vector<double> w(N, -std::numeric_limits<double>::infinity());
                    double mx = -std::numeric_limits<double>::infinity();
                    for (std::size_t j = 0; j < N; ++j) {
                        if (block[j] > block[i]) continue;
                        double dot = 0.0;
                        for (std::size_t d = 0; d < dh; ++d)
                            dot += q.data[i * C + hd * dh + d] * k.data[j * C + hd * dh + d];
                        const double du = (u[i] - u[j]) * Hq, dv = (v[i] - v[j]) * Wq;
                        w[j] = dot / std::sqrt(static_cast<double>(dh)) - slopes[hd] * std::hypot(du, dv);
                        mx = std::max(mx, w[j]);
                    }
                    double z = 0.0;
                    for (auto& e : w) {
                        e = std::exp(e - mx);
                        z += e;
                    }
                    for (std::size_t j = 0; j < N; ++j)
                        for (std::size_t d = 0; d < dh; ++d)
                            a.data[i * C + hd * dh + d] += w[j] / z * val.data[j * C + hd * dh + d];
                }
            }
            const TokenMatrix o = apply(lw.proj, a);
            for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += o.data[i];
            TokenMatrix up = apply(lw.ffn_up, rms(x, lw.norm2_gain));
            for (auto& e : up.data) e = gelu(e);
            const TokenMatrix down = apply(lw.ffn_down, up);
            for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += down.data[i];
        }

        TokenMatrix last(inputs[s].rows, C);
        std::copy(x.data.end() - static_cast<std::ptrdiff_t>(inputs[s].rows * C), x.data.end(), last.data.begin());
        outputs.push_back(std::move(last));
    }
    return outputs;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
    const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
    return ab / std::sqrt(aa * bb);
}

}  // namespace oracle

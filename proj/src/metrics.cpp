// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stepvar/error.hpp"

namespace stepvar {

namespace {

void require_same_shape(const FeatureGrid& a, const FeatureGrid& b, const char* op) {
    if (!a.same_shape(b)) {
        throw InvalidInput(std::string(op) + ": grids have different shapes");
    }
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
    const int half = size / 2;
    double total = 0.0;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double d2 = static_cast<double>((r - half) * (r - half) + (c - half) * (c - half));
            const double v = std::exp(-d2 / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(r * size + c)] = v;
            total += v;
        }
    }
    for (auto& v : w) v /= total;
    return w;
}

}  // namespace

double dynamic_range(const FeatureGrid& reference) {
    const auto [lo, hi] = std::minmax_element(reference.data().begin(), reference.data().end());
    const double range = *hi - *lo;
    return range > 0.0 ? range : 1.0;
}

double mean_squared_error(const FeatureGrid& reference, const FeatureGrid& test) {
    require_same_shape(reference, test, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.data().size(); ++i) {
        const double d = reference.data()[i] - test.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(reference.data().size());
}

double psnr(const FeatureGrid& reference, const FeatureGrid& test) {
    require_same_shape(reference, test, "psnr");
    const double mse = mean_squared_error(reference, test);
    if (mse == 0.0) return kPsnrCapDb;
    const double range = dynamic_range(reference);
    return std::min(kPsnrCapDb, 10.0 * std::log10(range * range / mse));
}

double ssim(const FeatureGrid& reference, const FeatureGrid& test, const SsimOptions& options) {
    require_same_shape(reference, test, "ssim");
    const std::size_t H = reference.height();
    const std::size_t W = reference.width();
    const std::size_t C = reference.channels();

    int win = std::min<int>(options.window, static_cast<int>(std::min(H, W)));
    if (win % 2 == 0) --win;
    const double sigma = options.sigma * static_cast<double>(win) / static_cast<double>(options.window);
    const std::vector<double> kernel = gaussian_window(win, sigma);

    const double range = dynamic_range(reference);
    const double c1 = (options.k1 * range) * (options.k1 * range);
    const double c2 = (options.k2 * range) * (options.k2 * range);

    double total = 0.0;
    std::size_t windows = 0;
    std::vector<double> a(H * W);
    std::vector<double> b(H * W);
    for (std::size_t bi = 0; bi < reference.batch(); ++bi) {
        for (std::size_t l = 0; l < H * W; ++l) {
            double sa = 0.0;
            double sb = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                sa += reference.at(bi, l, c);
                sb += test.at(bi, l, c);
            }
            a[l] = sa / static_cast<double>(C);
            b[l] = sb / static_cast<double>(C);
        }
        const auto w = static_cast<std::size_t>(win);
        for (std::size_t r0 = 0; r0 + w <= H; ++r0) {
            for (std::size_t c0 = 0; c0 + w <= W; ++c0) {
                double mu_a = 0.0, mu_b = 0.0, e_aa = 0.0, e_bb = 0.0, e_ab = 0.0;
                for (std::size_t r = 0; r < w; ++r) {
                    for (std::size_t c = 0; c < w; ++c) {
                        const double g = kernel[r * w + c];
                        const double va = a[(r0 + r) * W + c0 + c];
                        const double vb = b[(r0 + r) * W + c0 + c];
                        mu_a += g * va;
                        mu_b += g * vb;
                        e_aa += g * va * va;
                        e_bb += g * vb * vb;
                        e_ab += g * va * vb;
                    }
                }
                const double var_a = e_aa - mu_a * mu_a;
                const double var_b = e_bb - mu_b * mu_b;
                const double cov = e_ab - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace stepvar

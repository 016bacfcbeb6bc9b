// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/recovery.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "stepvar/error.hpp"
#include "stepvar/tensor_ops.hpp"

namespace stepvar {

void RecoveryStrategy::validate() const {
    if (anchor_stride < 1) {
        throw InvalidInput("anchor_stride must be >= 1");
    }
}

std::string_view to_string(RecoveryKind k) {
    switch (k) {
        case RecoveryKind::nearest_neighbor: return "nearest_neighbor";
        case RecoveryKind::cache_upsample: return "cache_upsample";
        case RecoveryKind::anchor_copy: return "anchor_copy";
    }
    return "unknown";
}

RecoveryKind parse_recovery_kind(std::string_view name) {
    for (auto k : {RecoveryKind::nearest_neighbor, RecoveryKind::cache_upsample, RecoveryKind::anchor_copy}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidInput("unknown recovery strategy '" + std::string(name) +
                       "' (expected nearest_neighbor, cache_upsample or anchor_copy)");
}

std::vector<std::size_t> nearest_assignment(std::span<const Index> sources, std::size_t height, std::size_t width) {
    const std::size_t L = height * width;
    if (sources.empty()) {
        throw InvalidInput("nearest_assignment: no source tokens");
    }
    for (const Index s : sources) {
        if (s < 0 || static_cast<std::size_t>(s) >= L) {
            throw InvalidInput("nearest_assignment: source index " + std::to_string(s) + " out of range");
        }
    }
    const auto W = static_cast<Index>(width);
    std::vector<Index> src_row(sources.size());
    std::vector<Index> src_col(sources.size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        src_row[j] = sources[j] / W;
        src_col[j] = sources[j] % W;
    }

    std::vector<std::size_t> assign(L);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < L; ++i) {
        const Index r = static_cast<Index>(i) / W;
        const Index c = static_cast<Index>(i) % W;
        Index best = std::numeric_limits<Index>::max();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const Index dr = r - src_row[j];
            const Index dc = c - src_col[j];
            const Index d = dr * dr + dc * dc;
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        assign[i] = arg;
    }
    return assign;
}

FeatureGrid nn_propagate(const SparseTokens& sparse) {
    sparse.validate();
    if (sparse.kept == 0) {
        throw InvalidInput("nn_propagate: at least one kept token is required");
    }
    FeatureGrid out(sparse.batch, sparse.height, sparse.width, sparse.channels);
    for (std::size_t b = 0; b < sparse.batch; ++b) {
        const auto assign = nearest_assignment(sparse.indices[b], sparse.height, sparse.width);
        for (std::size_t i = 0; i < assign.size(); ++i) {
            const auto src = sparse.token(b, assign[i]);
            std::copy(src.begin(), src.end(), out.token(b, i).begin());
        }
    }
    return out;
}

FeatureGrid cache_upsample(const FeatureGrid& prev, std::size_t height, std::size_t width) {
    if (height < prev.height() || width < prev.width()) {
        throw InvalidInput("cache_upsample: target " + std::to_string(height) + "x" + std::to_string(width) +
                           " is smaller than source " + std::to_string(prev.height()) + "x" +
                           std::to_string(prev.width()));
    }
    FeatureGrid out(prev.batch(), height, width, prev.channels());
    for (std::size_t b = 0; b < prev.batch(); ++b) {
#pragma omp parallel for schedule(static)
        for (std::size_t r = 0; r < height; ++r) {
            const std::size_t sr = r * prev.height() / height;
            for (std::size_t c = 0; c < width; ++c) {
                const std::size_t sc = c * prev.width() / width;
                const auto src = prev.token(b, sr * prev.width() + sc);
                std::copy(src.begin(), src.end(), out.token(b, r * width + c).begin());
            }
        }
    }
    return out;
}

std::vector<Index> anchor_grid(std::size_t height, std::size_t width, int stride) {
    if (stride < 1) {
        throw InvalidInput("anchor_grid: stride must be >= 1");
    }
    const auto step = static_cast<std::size_t>(stride);
    std::vector<Index> anchors;
    for (std::size_t r = 0; r < height; r += step) {
        for (std::size_t c = 0; c < width; c += step) {
            anchors.push_back(static_cast<Index>(r * width + c));
        }
    }
    return anchors;
}

FeatureGrid anchor_copy(const SparseTokens& sparse, std::span<const Index> anchors) {
    sparse.validate();
    if (anchors.empty()) {
        throw InvalidInput("anchor_copy: anchor set is empty");
    }
    FeatureGrid out(sparse.batch, sparse.height, sparse.width, sparse.channels);
    const auto assign = nearest_assignment(anchors, sparse.height, sparse.width);
    for (std::size_t b = 0; b < sparse.batch; ++b) {
        const auto& kept = sparse.indices[b];
        // Position of each anchor inside this row's kept list.
        std::vector<std::size_t> anchor_slot(anchors.size());
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            const auto it = std::lower_bound(kept.begin(), kept.end(), anchors[a]);
            if (it == kept.end() || *it != anchors[a]) {
                throw InvalidInput("anchor_copy: anchor " + std::to_string(anchors[a]) +
                                   " is not among the kept tokens of batch row " + std::to_string(b));
            }
            anchor_slot[a] = static_cast<std::size_t>(it - kept.begin());
        }
        std::vector<std::ptrdiff_t> kept_slot(sparse.height * sparse.width, -1);
        for (std::size_t j = 0; j < kept.size(); ++j) kept_slot[static_cast<std::size_t>(kept[j])] = static_cast<std::ptrdiff_t>(j);

        for (std::size_t i = 0; i < assign.size(); ++i) {
            const std::size_t slot =
                kept_slot[i] >= 0 ? static_cast<std::size_t>(kept_slot[i]) : anchor_slot[assign[i]];
            const auto src = sparse.token(b, slot);
            std::copy(src.begin(), src.end(), out.token(b, i).begin());
        }
    }
    return out;
}

std::vector<Index> force_include(std::span<const double> scores, std::size_t k, std::span<const Index> must_keep) {
    const std::size_t L = scores.size();
    if (must_keep.size() > k) {
        throw InvalidInput("force_include: " + std::to_string(must_keep.size()) +
                           " forced tokens exceed the kept budget k = " + std::to_string(k));
    }
    if (k > L) {
        throw InvalidInput("force_include: k exceeds token count");
    }
    std::vector<std::uint8_t> forced(L, 0);
    for (const Index m : must_keep) {
        if (m < 0 || static_cast<std::size_t>(m) >= L) {
            throw InvalidInput("force_include: forced index " + std::to_string(m) + " out of range");
        }
        if (forced[static_cast<std::size_t>(m)]) {
            throw InvalidInput("force_include: duplicate forced index " + std::to_string(m));
        }
        forced[static_cast<std::size_t>(m)] = 1;
    }
    std::vector<Index> rest;
    rest.reserve(L - must_keep.size());
    for (std::size_t i = 0; i < L; ++i) {
        if (!forced[i]) rest.push_back(static_cast<Index>(i));
    }
    const std::size_t fill = k - must_keep.size();
    const auto better = [&](Index a, Index c) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sc = scores[static_cast<std::size_t>(c)];
        return sa > sc || (sa == sc && a < c);
    };
    std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill), rest.end(), better);

    std::vector<Index> kept(must_keep.begin(), must_keep.end());
    kept.insert(kept.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill));
    std::sort(kept.begin(), kept.end());
    return kept;
}

SparseTokens force_include(const FeatureGrid& x, const ScoreVector& scores, const SparseTokens& selection,
                           std::span<const Index> must_keep) {
    selection.validate();
    if (scores.batch != x.batch() || scores.tokens != x.tokens()) {
        throw InvalidInput("force_include: score shape does not match grid");
    }
    KeptIndices kept(x.batch());
    for (std::size_t b = 0; b < x.batch(); ++b) {
        kept[b] = force_include(scores.row(b), selection.kept, must_keep);
    }
    return gather_tokens(x, kept);
}

}  // namespace stepvar

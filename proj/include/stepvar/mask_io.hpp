// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stepvar/feature_grid.hpp"

namespace stepvar {

struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  ///< row-major
};

/**
 * Writes a binary PGM (P5, maxval 255) with kept tokens white (255) and pruned
 * tokens black, plus a sibling .csv listing the kept indices one per line.
 * Throws std::runtime_error when the files cannot be written.
 */
void export_mask(std::span<const Index> kept, std::size_t height, std::size_t width,
                 const std::filesystem::path& pgm_path);

GrayImage read_pgm(const std::filesystem::path& path);

/// Indices of nonzero pixels, ascending.
std::vector<Index> kept_from_mask(const GrayImage& image);

}  // namespace stepvar

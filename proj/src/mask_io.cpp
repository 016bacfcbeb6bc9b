// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/mask_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "stepvar/error.hpp"

namespace stepvar {

void export_mask(std::span<const Index> kept, std::size_t height, std::size_t width,
                 const std::filesystem::path& pgm_path) {
    const std::size_t L = height * width;
    std::vector<std::uint8_t> pixels(L, 0);
    for (const Index i : kept) {
        if (i < 0 || static_cast<std::size_t>(i) >= L) {
            throw InvalidInput("export_mask: index " + std::to_string(i) + " out of range");
        }
        pixels[static_cast<std::size_t>(i)] = 255;
    }

    std::ofstream pgm(pgm_path, std::ios::binary);
    if (!pgm) throw std::runtime_error("cannot write mask image '" + pgm_path.string() + "'");
    pgm << "P5\n" << width << ' ' << height << "\n255\n";
    pgm.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!pgm) throw std::runtime_error("failed writing mask image '" + pgm_path.string() + "'");

    auto csv_path = pgm_path;
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write mask index file '" + csv_path.string() + "'");
    csv << "index,row,col\n";
    for (const Index i : kept) {
        csv << i << ',' << static_cast<std::size_t>(i) / width << ',' << static_cast<std::size_t>(i) % width << '\n';
    }
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("'" + path.string() + "' is not a binary PGM");
    GrayImage img;
    int maxval = 0;
    in >> img.width >> img.height >> maxval;
    if (!in || maxval != 255) throw std::runtime_error("unsupported PGM header in '" + path.string() + "'");
    in.get();  // single whitespace before the raster
    img.pixels.resize(img.width * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw std::runtime_error("truncated PGM raster in '" + path.string() + "'");
    return img;
}

std::vector<Index> kept_from_mask(const GrayImage& image) {
    std::vector<Index> kept;
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        if (image.pixels[i] != 0) kept.push_back(static_cast<Index>(i));
    }
    return kept;
}

}  // namespace stepvar

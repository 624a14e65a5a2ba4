#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dtsl/label_map.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// Binary greyscale (P5, maxval 255).
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm(const std::filesystem::path& path);

// [1,H,W] or [H,W] values in [0,1] scaled to 0..255.
GrayImage image_to_gray(const Tensor& image);
// Class c -> round(255 c / (K-1)) for sample b.
GrayImage labels_to_gray(const LabelMap& labels, std::size_t b, std::size_t num_classes);
// Tiles images of equal height left to right.
GrayImage tile_horizontal(const std::vector<GrayImage>& tiles);

}  // namespace dtsl

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dtsl {

// Hard per-pixel class indices, layout [batch, height, width].
struct LabelMap {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::int32_t> labels;

    LabelMap() = default;
    LabelMap(std::size_t b, std::size_t h, std::size_t w, std::int32_t fill = 0)
        : batch(b), height(h), width(w), labels(b * h * w, fill) {}

    std::size_t pixels_per_sample() const { return height * width; }
    std::int32_t at(std::size_t b, std::size_t y, std::size_t x) const { return labels[(b * height + y) * width + x]; }
    std::int32_t& at(std::size_t b, std::size_t y, std::size_t x) { return labels[(b * height + y) * width + x]; }

    bool operator==(const LabelMap&) const = default;
};

}  // namespace dtsl

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtsl/label_map.hpp"

namespace dtsl {

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

    // Pixels of sample `b` equal to `cls`.
    static BinaryMask of_class(const LabelMap& labels, std::size_t b, std::int32_t cls);

    bool get(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v = true) { bits[y * width + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
};

struct Pixel {
    std::size_t y = 0;
    std::size_t x = 0;
};

// Mask pixels with at least one 4-neighbour outside the mask; pixels on the
// image border count as boundary.
std::vector<Pixel> boundary(const BinaryMask& m);

// Percent overlap scores; both-empty counts as a perfect match (100).
double dsc(const BinaryMask& pred, const BinaryMask& gt);
double jaccard(const BinaryMask& pred, const BinaryMask& gt);

// Boundary distances in pixels. nullopt when either mask is empty.
// hd95 takes the pooled two-direction distances, sorted ascending, at index
// ceil(0.95 n) - 1.
std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& gt);
std::optional<double> asd(const BinaryMask& pred, const BinaryMask& gt);

// Distances from each boundary pixel of `from` to the nearest boundary pixel
// of `to`, via an exact Euclidean distance transform.
std::vector<double> boundary_distances(const BinaryMask& from, const BinaryMask& to);

// Squared Euclidean distance to the nearest set pixel (exact, separable
// lower-envelope transform). Unset masks give +infinity everywhere.
std::vector<double> squared_distance_transform(const BinaryMask& sites);

struct ClassMetrics {
    double dsc = 0.0;
    double jaccard = 0.0;
    std::optional<double> hd95;
    std::optional<double> asd;
    std::size_t distance_samples = 0;  // samples where hd95/asd were defined
};

// Per-class means over samples (distances averaged over defined samples
// only) and the foreground mean over classes 1..K-1.
struct MetricReport {
    std::size_t num_classes = 0;
    std::vector<ClassMetrics> per_class;  // index = class, 0 included
    ClassMetrics foreground;
};

MetricReport evaluate_segmentation(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes);

std::string metrics_csv_header();
// One row per foreground class plus a "mean" row, prefixed by `model`.
std::vector<std::string> metrics_csv_rows(const std::string& model, const MetricReport& r);

}  // namespace dtsl

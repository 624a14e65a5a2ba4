#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dtsl/label_map.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

struct SyntheticSample {
    Tensor image;    // [1,H,W], values in [0,1]
    LabelMap label;  // batch 1
};

// Ellipse in pixel coordinates, used by the generator and by containment
// checks in tests.
struct Ellipse {
    double cy = 0.0;
    double cx = 0.0;
    double ry = 1.0;
    double rx = 1.0;
    double angle = 0.0;

    // Squared normalized radius of (y, x); <= 1 inside.
    double radius2(double y, double x) const;
};

// Shape parameters behind one sample. inner is expressed in the outer
// ellipse's normalized frame: centre (u, v) and scale s.
struct SampleGeometry {
    Ellipse outer;
    double inner_u = 0.0;
    double inner_v = 0.0;
    double inner_scale = 0.5;
    std::vector<Ellipse> blobs;  // classes 3..K-1
    std::vector<double> intensity;  // per class
    std::size_t attempts = 1;

    bool in_inner(double y, double x) const;
};

struct SyntheticOptions {
    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t num_classes = 4;
    double noise_sigma = 0.08;
};

// Outer ellipse (class 1) holding a nested inner ellipse (class 2), plus one
// separate blob per further class. Deterministic per (seed, index).
std::vector<SyntheticSample> generate(const SyntheticOptions& opts);
SyntheticSample generate_one(const SyntheticOptions& opts, std::size_t index, SampleGeometry* geometry = nullptr);

struct DatasetSplit {
    std::vector<SyntheticSample> labeled;
    std::vector<SyntheticSample> unlabeled;
    std::vector<SyntheticSample> test;
    std::vector<std::size_t> labeled_index;
    std::vector<std::size_t> unlabeled_index;
    std::vector<std::size_t> test_index;
};

// Shuffled split. test = round(test_fraction * n); labeled =
// max(1, round(labeled_fraction * train)); the rest is unlabeled.
DatasetSplit split(const std::vector<SyntheticSample>& samples, double labeled_fraction, double test_fraction,
                   std::uint64_t seed);

// Stacks the selected samples into [B,1,H,W] images and a LabelMap.
Tensor stack_images(const std::vector<SyntheticSample>& samples, const std::vector<std::size_t>& which);
LabelMap stack_labels(const std::vector<SyntheticSample>& samples, const std::vector<std::size_t>& which);

}  // namespace dtsl

#include "dtsl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dtsl/rng.hpp"

namespace dtsl {

double Ellipse::radius2(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(angle), s = std::sin(angle);
    const double a = (c * dx + s * dy) / rx;
    const double b = (-s * dx + c * dy) / ry;
    return a * a + b * b;
}

bool SampleGeometry::in_inner(double y, double x) const {
    const double dy = y - outer.cy, dx = x - outer.cx;
    const double c = std::cos(outer.angle), s = std::sin(outer.angle);
    const double a = (c * dx + s * dy) / outer.rx - inner_u;
    const double b = (-s * dx + c * dy) / outer.ry - inner_v;
    return a * a + b * b <= inner_scale * inner_scale;
}

namespace {

// Nominal grey levels per class; 1 and 3 sit close so intensity alone does
// not separate them.
constexpr double kBaseIntensity[6] = {0.2, 0.52, 0.85, 0.62, 0.36, 0.72};
constexpr double kIntensityJitter = 0.03;
constexpr std::size_t kMaxAttempts = 200;

void check_options(const SyntheticOptions& o) {
    if (o.height == 0 || o.width == 0 || o.height % 4 != 0 || o.width % 4 != 0) {
        throw std::invalid_argument("generate: height and width must be positive multiples of 4");
    }
    if (o.num_classes < 2 || o.num_classes > 6) throw std::invalid_argument("generate: num_classes must be in 2..6");
    if (!(o.noise_sigma >= 0.0)) throw std::invalid_argument("generate: noise_sigma must be non-negative");
}

SampleGeometry draw_geometry(Rng& rng, const SyntheticOptions& o) {
    const double h = static_cast<double>(o.height), w = static_cast<double>(o.width);
    SampleGeometry g;
    g.outer.cy = rng.uniform(0.32, 0.68) * h;
    g.outer.cx = rng.uniform(0.32, 0.68) * w;
    g.outer.ry = rng.uniform(0.14, 0.23) * h;
    g.outer.rx = rng.uniform(0.14, 0.23) * w;
    g.outer.angle = rng.uniform(0.0, std::numbers::pi);
    g.inner_scale = rng.uniform(0.4, 0.6);
    // |offset| <= 0.2 keeps the inner disc within radius 0.8 of the outer one.
    const double r = 0.2 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.inner_u = r * std::cos(phi);
    g.inner_v = r * std::sin(phi);
    for (std::size_t c = 3; c < o.num_classes; ++c) {
        Ellipse b;
        b.ry = rng.uniform(0.06, 0.11) * h;
        b.rx = rng.uniform(0.06, 0.11) * w;
        b.angle = rng.uniform(0.0, std::numbers::pi);
        b.cy = rng.uniform(0.1, 0.9) * h;
        b.cx = rng.uniform(0.1, 0.9) * w;
        g.blobs.push_back(b);
    }
    for (std::size_t c = 0; c < o.num_classes; ++c) {
        g.intensity.push_back(kBaseIntensity[c] + rng.uniform(-kIntensityJitter, kIntensityJitter));
    }
    return g;
}

// Rasterizes at pixel centres. Blobs may not touch a margin around the outer
// ellipse or each other.
bool rasterize(const SampleGeometry& g, const SyntheticOptions& o, LabelMap& label) {
    std::vector<std::size_t> counts(o.num_classes, 0);
    for (std::size_t y = 0; y < o.height; ++y)
        for (std::size_t x = 0; x < o.width; ++x) {
            const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
            const double r_outer = g.outer.radius2(py, px);
            std::int32_t cls = 0;
            if (r_outer <= 1.0) cls = (o.num_classes >= 3 && g.in_inner(py, px)) ? 2 : 1;
            for (std::size_t i = 0; i < g.blobs.size(); ++i) {
                if (g.blobs[i].radius2(py, px) > 1.0) continue;
                if (r_outer <= 1.3 * 1.3 || cls >= 3) return false;
                cls = static_cast<std::int32_t>(3 + i);
            }
            label.at(0, y, x) = cls;
            ++counts[static_cast<std::size_t>(cls)];
        }
    std::size_t foreground = 0;
    for (std::size_t c = 1; c < o.num_classes; ++c) {
        if (counts[c] == 0) return false;
        foreground += counts[c];
    }
    return counts[0] > foreground;
}

}  // namespace

SyntheticSample generate_one(const SyntheticOptions& o, std::size_t index, SampleGeometry* geometry) {
    check_options(o);
    Rng rng(o.seed, index);
    SyntheticSample s;
    s.label = LabelMap(1, o.height, o.width);
    SampleGeometry g;
    std::size_t attempt = 0;
    for (;;) {
        if (++attempt > kMaxAttempts) {
            throw std::runtime_error("generate: could not place all classes for sample " + std::to_string(index));
        }
        g = draw_geometry(rng, o);
        if (rasterize(g, o, s.label)) break;
    }
    g.attempts = attempt;
    std::vector<double> pixels(o.height * o.width);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double v = g.intensity[static_cast<std::size_t>(s.label.labels[i])];
        const double noisy = o.noise_sigma > 0.0 ? v + o.noise_sigma * rng.normal() : v;
        pixels[i] = std::clamp(noisy, 0.0, 1.0);
    }
    s.image = Tensor({1, o.height, o.width}, std::move(pixels));
    if (geometry) *geometry = g;
    return s;
}

std::vector<SyntheticSample> generate(const SyntheticOptions& o) {
    check_options(o);
    std::vector<SyntheticSample> out;
    out.reserve(o.count);
    for (std::size_t i = 0; i < o.count; ++i) out.push_back(generate_one(o, i));
    return out;
}

DatasetSplit split(const std::vector<SyntheticSample>& samples, double labeled_fraction, double test_fraction,
                   std::uint64_t seed) {
    if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0) || !(test_fraction > 0.0 && test_fraction < 1.0) ||
        !(labeled_fraction + test_fraction < 1.0)) {
        throw std::invalid_argument("split: fractions must lie in (0,1) and sum below 1");
    }
    const std::size_t n = samples.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) throw std::invalid_argument("split: degenerate test count");
    const std::size_t n_train = n - n_test;
    const auto n_labeled =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(n_train))));
    if (n_labeled >= n_train) throw std::invalid_argument("split: no unlabeled samples remain");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed, 0x5a17);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    DatasetSplit d;
    d.test_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    d.labeled_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                           order.begin() + static_cast<std::ptrdiff_t>(n_test + n_labeled));
    d.unlabeled_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_labeled), order.end());
    for (auto i : d.test_index) d.test.push_back(samples[i]);
    for (auto i : d.labeled_index) d.labeled.push_back(samples[i]);
    for (auto i : d.unlabeled_index) d.unlabeled.push_back(samples[i]);
    return d;
}

Tensor stack_images(const std::vector<SyntheticSample>& samples, const std::vector<std::size_t>& which) {
    if (which.empty()) throw std::invalid_argument("stack_images: empty selection");
    const Shape& s = samples.at(which[0]).image.shape();
    const std::size_t plane = s[1] * s[2];
    std::vector<double> v;
    v.reserve(which.size() * plane);
    for (auto i : which) {
        const auto d = samples.at(i).image.data();
        if (d.size() != plane) throw std::invalid_argument("stack_images: mixed image sizes");
        v.insert(v.end(), d.begin(), d.end());
    }
    return Tensor({which.size(), 1, s[1], s[2]}, std::move(v));
}

LabelMap stack_labels(const std::vector<SyntheticSample>& samples, const std::vector<std::size_t>& which) {
    if (which.empty()) throw std::invalid_argument("stack_labels: empty selection");
    const LabelMap& first = samples.at(which[0]).label;
    LabelMap out(which.size(), first.height, first.width);
    const std::size_t plane = first.pixels_per_sample();
    for (std::size_t b = 0; b < which.size(); ++b) {
        const LabelMap& l = samples.at(which[b]).label;
        std::copy(l.labels.begin(), l.labels.end(), out.labels.begin() + static_cast<std::ptrdiff_t>(b * plane));
    }
    return out;
}

}  // namespace dtsl

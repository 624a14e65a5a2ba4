#include "dtsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dtsl/csv.hpp"

namespace dtsl {

BinaryMask BinaryMask::of_class(const LabelMap& labels, std::size_t b, std::int32_t cls) {
    BinaryMask m(labels.height, labels.width);
    const std::size_t plane = labels.pixels_per_sample();
    for (std::size_t i = 0; i < plane; ++i) m.bits[i] = labels.labels[b * plane + i] == cls ? 1 : 0;
    return m;
}

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto v : bits) n += v != 0;
    return n;
}

namespace {

void check_same(const BinaryMask& a, const BinaryMask& b) {
    if (a.height != b.height || a.width != b.width) throw std::invalid_argument("metrics: mask shape mismatch");
}

struct Overlap {
    std::size_t intersection = 0;
    std::size_t a = 0;
    std::size_t b = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
    check_same(a, b);
    Overlap o;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool x = a.bits[i] != 0, y = b.bits[i] != 0;
        o.a += x;
        o.b += y;
        o.intersection += x && y;
    }
    return o;
}

// One row of the lower-envelope transform: out[q] = min_p (q - p)^2 + f[p].
void envelope_1d(const double* f, std::size_t n, double* out, std::vector<std::size_t>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    std::size_t k = 0;
    std::size_t first = n;
    for (std::size_t q = 0; q < n; ++q)
        if (f[q] < inf) {
            first = q;
            break;
        }
    if (first == n) {
        std::fill(out, out + n, inf);
        return;
    }
    v[0] = first;
    z[0] = -inf;
    z[1] = inf;
    for (std::size_t q = first + 1; q < n; ++q) {
        if (f[q] == inf) continue;
        const auto qd = static_cast<double>(q);
        double s;
        for (;;) {
            const auto vk = static_cast<double>(v[k]);
            s = ((f[q] + qd * qd) - (f[v[k]] + vk * vk)) / (2.0 * qd - 2.0 * vk);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double d = static_cast<double>(q) - static_cast<double>(v[k]);
        out[q] = d * d + f[v[k]];
    }
}

}  // namespace

std::vector<Pixel> boundary(const BinaryMask& m) {
    std::vector<Pixel> out;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x) {
            if (!m.get(y, x)) continue;
            const bool edge = y == 0 || x == 0 || y + 1 == m.height || x + 1 == m.width || !m.get(y - 1, x) ||
                              !m.get(y + 1, x) || !m.get(y, x - 1) || !m.get(y, x + 1);
            if (edge) out.push_back({y, x});
        }
    return out;
}

double dsc(const BinaryMask& pred, const BinaryMask& gt) {
    const Overlap o = overlap(pred, gt);
    if (o.a + o.b == 0) return 100.0;
    return 100.0 * 2.0 * static_cast<double>(o.intersection) / static_cast<double>(o.a + o.b);
}

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    const Overlap o = overlap(pred, gt);
    const std::size_t uni = o.a + o.b - o.intersection;
    if (uni == 0) return 100.0;
    return 100.0 * static_cast<double>(o.intersection) / static_cast<double>(uni);
}

std::vector<double> squared_distance_transform(const BinaryMask& sites) {
    const std::size_t h = sites.height, w = sites.width;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(h * w);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = sites.bits[i] ? 0.0 : inf;
    std::vector<double> col(h), col_out(h), row_out(w);
    std::vector<std::size_t> v;
    std::vector<double> z;
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y = 0; y < h; ++y) col[y] = grid[y * w + x];
        envelope_1d(col.data(), h, col_out.data(), v, z);
        for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = col_out[y];
    }
    for (std::size_t y = 0; y < h; ++y) {
        envelope_1d(&grid[y * w], w, row_out.data(), v, z);
        std::copy(row_out.begin(), row_out.end(), grid.begin() + static_cast<std::ptrdiff_t>(y * w));
    }
    return grid;
}

std::vector<double> boundary_distances(const BinaryMask& from, const BinaryMask& to) {
    check_same(from, to);
    BinaryMask to_edge(to.height, to.width);
    for (const Pixel& p : boundary(to)) to_edge.set(p.y, p.x);
    const std::vector<double> d2 = squared_distance_transform(to_edge);
    std::vector<double> out;
    for (const Pixel& p : boundary(from)) out.push_back(std::sqrt(d2[p.y * from.width + p.x]));
    return out;
}

namespace {

std::optional<std::vector<double>> pooled(const BinaryMask& a, const BinaryMask& b) {
    check_same(a, b);
    if (a.empty() || b.empty()) return std::nullopt;
    std::vector<double> d = boundary_distances(a, b);
    const std::vector<double> back = boundary_distances(b, a);
    d.insert(d.end(), back.begin(), back.end());
    return d;
}

}  // namespace

std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& gt) {
    auto d = pooled(pred, gt);
    if (!d) return std::nullopt;
    std::sort(d->begin(), d->end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d->size()))) - 1;
    return (*d)[idx];
}

std::optional<double> asd(const BinaryMask& pred, const BinaryMask& gt) {
    auto d = pooled(pred, gt);
    if (!d) return std::nullopt;
    double total = 0.0;
    for (double v : *d) total += v;
    return total / static_cast<double>(d->size());
}

MetricReport evaluate_segmentation(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes) {
    if (pred.batch != gt.batch || pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("evaluate_segmentation: label map shapes differ");
    }
    if (num_classes < 2) throw std::invalid_argument("evaluate_segmentation: need at least 2 classes");
    MetricReport r;
    r.num_classes = num_classes;
    r.per_class.resize(num_classes);
    const double n = static_cast<double>(pred.batch);
    for (std::size_t c = 0; c < num_classes; ++c) {
        ClassMetrics& m = r.per_class[c];
        double hd_sum = 0.0, asd_sum = 0.0;
        for (std::size_t b = 0; b < pred.batch; ++b) {
            const auto cls = static_cast<std::int32_t>(c);
            const BinaryMask p = BinaryMask::of_class(pred, b, cls);
            const BinaryMask g = BinaryMask::of_class(gt, b, cls);
            m.dsc += dsc(p, g) / n;
            m.jaccard += jaccard(p, g) / n;
            const auto h = hd95(p, g);
            if (h) {
                hd_sum += *h;
                asd_sum += *asd(p, g);
                ++m.distance_samples;
            }
        }
        if (m.distance_samples > 0) {
            m.hd95 = hd_sum / static_cast<double>(m.distance_samples);
            m.asd = asd_sum / static_cast<double>(m.distance_samples);
        }
    }
    ClassMetrics& fg = r.foreground;
    const double k = static_cast<double>(num_classes - 1);
    double hd_sum = 0.0, asd_sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 1; c < num_classes; ++c) {
        fg.dsc += r.per_class[c].dsc / k;
        fg.jaccard += r.per_class[c].jaccard / k;
        fg.distance_samples += r.per_class[c].distance_samples;
        if (r.per_class[c].hd95) {
            hd_sum += *r.per_class[c].hd95;
            asd_sum += *r.per_class[c].asd;
            ++defined;
        }
    }
    if (defined > 0) {
        fg.hd95 = hd_sum / static_cast<double>(defined);
        fg.asd = asd_sum / static_cast<double>(defined);
    }
    return r;
}

std::string metrics_csv_header() { return "model,class,dsc,jaccard,hd95,asd,distance_samples"; }

std::vector<std::string> metrics_csv_rows(const std::string& model, const MetricReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? csv::fmt(*v) : std::string("undefined"); };
    auto row = [&](const std::string& cls, const ClassMetrics& m) {
        return csv::join({model, cls, csv::fmt(m.dsc), csv::fmt(m.jaccard), opt(m.hd95), opt(m.asd),
                          std::to_string(m.distance_samples)});
    };
    std::vector<std::string> rows;
    for (std::size_t c = 1; c < r.num_classes; ++c) rows.push_back(row(std::to_string(c), r.per_class[c]));
    rows.push_back(row("mean", r.foreground));
    return rows;
}

}  // namespace dtsl

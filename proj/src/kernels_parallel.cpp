#include <algorithm>
#include <cstring>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtsl/kernels.hpp"

namespace dtsl::kernels {

void ConvGeometry::validate() const {
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
    if (kernel_h == 0 || kernel_w == 0) throw std::invalid_argument("conv2d: empty kernel");
    if (kernel_h > height + 2 * padding || kernel_w > width + 2 * padding) {
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    }
    if ((height + 2 * padding - kernel_h) % stride != 0 || (width + 2 * padding - kernel_w) % stride != 0) {
        throw std::invalid_argument("conv2d: non-integral output size for input " + std::to_string(height) + "x" +
                                    std::to_string(width) + ", kernel " + std::to_string(kernel_h) + "x" +
                                    std::to_string(kernel_w) + ", stride " + std::to_string(stride) +
                                    ", padding " + std::to_string(padding));
    }
}

namespace {

// Half-open range of output positions whose tap `k` reads inside [0, extent).
struct Span1d {
    std::size_t lo;
    std::size_t hi;
};

Span1d valid_outputs(std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent, std::size_t out_len) {
    std::size_t lo = 0;
    if (pad > k) lo = (pad - k + stride - 1) / stride;
    // need o*stride + k - pad <= extent - 1
    if (extent + pad < k + 1) return {0, 0};
    std::size_t hi = (extent - 1 + pad - k) / stride + 1;
    hi = std::min(hi, out_len);
    if (lo > hi) lo = hi;
    return {lo, hi};
}

}  // namespace

namespace {

constexpr std::size_t kBlock = 4;    // output columns per register block
constexpr std::size_t kChanBlock = 4;  // output channels per register block

// Zero-padded copies of image planes. Row r, column c of plane i holds
// src[i][r - top][c - left] or 0.
struct PaddedPlanes {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    const double* plane(std::size_t i) const { return data.data() + i * rows * cols; }
};

PaddedPlanes pad_planes(const double* src, std::size_t planes, std::size_t h, std::size_t w, std::size_t top,
                        std::size_t rows, std::size_t left, std::size_t cols) {
    PaddedPlanes p{rows, cols, std::vector<double>(planes * rows * cols, 0.0)};
    for (std::size_t i = 0; i < planes; ++i)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(src + (i * h + y) * w, w, p.data.begin() + static_cast<std::ptrdiff_t>((i * rows + y + top) * cols + left));
    return p;
}

// Shared stride-1 core for the forward pass and the input gradient.
//
//   out[b][m][y][x] = sum over n, ky, kx (in that order, from 0.0) of
//                     weight(m, n, ky, kx) * src[b][n][y + ry(ky)][x + rx(kx)]
//
// with ry(ky) = ky, rx(kx) = kx for the forward pass and the flipped
// kh-1-ky, kw-1-kx for the input gradient. Terms read from the zero padding
// add +-0, which leaves a sum that started at +0.0 unchanged, so results
// match a loop that skips out-of-range taps bit for bit.
struct CorrelationPlan {
    std::size_t batch;
    std::size_t out_channels;  // m
    std::size_t in_channels;   // n
    std::size_t out_h;
    std::size_t out_w;
    std::size_t kh;
    std::size_t kw;
    bool flip;
    // packed[((mb * in_channels + n) * kh + ky) * kw + kx][c] = weight(mb*4 + c, n, ky, kx), zero past the end
    std::vector<double> packed;
};

using Pair = double __attribute__((vector_size(16)));

inline Pair load_pair(const double* p) {
    Pair v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

template <std::size_t KW>
void correlate_block(const CorrelationPlan& plan, const PaddedPlanes& src, std::size_t b, std::size_t mb,
                     double* out) {
    static_assert(kBlock == 4 && kChanBlock == 4);
    const std::size_t kw = KW ? KW : plan.kw;
    const std::size_t kh = plan.kh;
    const std::size_t m0 = mb * kChanBlock;
    const std::size_t nm = std::min(kChanBlock, plan.out_channels - m0);
    const double* wbase = plan.packed.data() + mb * plan.in_channels * kh * kw * kChanBlock;
    for (std::size_t y = 0; y < plan.out_h; ++y) {
        for (std::size_t x0 = 0; x0 < plan.out_w; x0 += kBlock) {
            Pair a0l{}, a0h{}, a1l{}, a1h{}, a2l{}, a2h{}, a3l{}, a3h{};
            const double* w = wbase;
            for (std::size_t n = 0; n < plan.in_channels; ++n) {
                const double* sp = src.plane(b * plan.in_channels + n) + y * src.cols + x0;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const double* row = sp + (plan.flip ? kh - 1 - ky : ky) * src.cols;
                    for (std::size_t kx = 0; kx < kw; ++kx, w += kChanBlock) {
                        const double* r = row + (plan.flip ? kw - 1 - kx : kx);
                        const Pair lo = load_pair(r);
                        const Pair hi = load_pair(r + 2);
                        const Pair w0 = {w[0], w[0]}, w1 = {w[1], w[1]}, w2 = {w[2], w[2]}, w3 = {w[3], w[3]};
                        a0l += w0 * lo;
                        a0h += w0 * hi;
                        a1l += w1 * lo;
                        a1h += w1 * hi;
                        a2l += w2 * lo;
                        a2h += w2 * hi;
                        a3l += w3 * lo;
                        a3h += w3 * hi;
                    }
                }
            }
            const Pair acc[kChanBlock][2] = {{a0l, a0h}, {a1l, a1h}, {a2l, a2h}, {a3l, a3h}};
            const std::size_t nx = std::min(kBlock, plan.out_w - x0);
            for (std::size_t c = 0; c < nm; ++c) {
                double* dst = out + ((b * plan.out_channels + m0 + c) * plan.out_h + y) * plan.out_w + x0;
                for (std::size_t j = 0; j < nx; ++j) dst[j] = acc[c][j / 2][j % 2];
            }
        }
    }
}

void correlate(const CorrelationPlan& plan, const PaddedPlanes& src, double* out) {
    const std::size_t mblocks = (plan.out_channels + kChanBlock - 1) / kChanBlock;
    const auto tasks = static_cast<std::ptrdiff_t>(plan.batch * mblocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < tasks; ++t) {
        const std::size_t b = static_cast<std::size_t>(t) / mblocks;
        const std::size_t mb = static_cast<std::size_t>(t) % mblocks;
        switch (plan.kw) {
            case 1:
                correlate_block<1>(plan, src, b, mb, out);
                break;
            case 3:
                correlate_block<3>(plan, src, b, mb, out);
                break;
            default:
                correlate_block<0>(plan, src, b, mb, out);
        }
    }
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

void forward_s1(const ConvGeometry& g, const double* input, const double* kernel, double* out) {
    CorrelationPlan plan{g.batch, g.out_channels, g.in_channels, g.out_h(), g.out_w(), g.kernel_h, g.kernel_w, false, {}};
    const std::size_t mblocks = (g.out_channels + kChanBlock - 1) / kChanBlock;
    const std::size_t taps = g.kernel_h * g.kernel_w;
    plan.packed.assign(mblocks * g.in_channels * taps * kChanBlock, 0.0);
    for (std::size_t m = 0; m < g.out_channels; ++m)
        for (std::size_t n = 0; n < g.in_channels; ++n)
            for (std::size_t t = 0; t < taps; ++t)
                plan.packed[(((m / kChanBlock) * g.in_channels + n) * taps + t) * kChanBlock + m % kChanBlock] =
                    kernel[(m * g.in_channels + n) * taps + t];
    const PaddedPlanes src = pad_planes(input, g.batch * g.in_channels, g.height, g.width, g.padding,
                                        g.height + 2 * g.padding, g.padding,
                                        round_up(plan.out_w, kBlock) + g.kernel_w - 1);
    correlate(plan, src, out);
}

// Needs padding <= kernel - 1 in both directions.
void backward_input_s1(const ConvGeometry& g, const double* grad_out, const double* kernel, double* grad_in) {
    CorrelationPlan plan{g.batch, g.in_channels, g.out_channels, g.height, g.width, g.kernel_h, g.kernel_w, true, {}};
    const std::size_t mblocks = (g.in_channels + kChanBlock - 1) / kChanBlock;
    const std::size_t taps = g.kernel_h * g.kernel_w;
    plan.packed.assign(mblocks * g.out_channels * taps * kChanBlock, 0.0);
    for (std::size_t m = 0; m < g.in_channels; ++m)
        for (std::size_t n = 0; n < g.out_channels; ++n)
            for (std::size_t t = 0; t < taps; ++t)
                plan.packed[(((m / kChanBlock) * g.out_channels + n) * taps + t) * kChanBlock + m % kChanBlock] =
                    kernel[(n * g.in_channels + m) * taps + t];
    const std::size_t qy = g.kernel_h - 1 - g.padding;
    const std::size_t qx = g.kernel_w - 1 - g.padding;
    const PaddedPlanes src = pad_planes(grad_out, g.batch * g.out_channels, g.out_h(), g.out_w(), qy,
                                        g.height + g.kernel_h - 1, qx, round_up(g.width, kBlock) + g.kernel_w - 1);
    correlate(plan, src, grad_in);
}

// Kernel gradient, stride 1. Lanes hold two output channels; every tap of
// every (co, ci) pair still collects go * x over (b, oy, ox) in ascending
// order, padding terms included. `go_pairs` interleaves grad_out as
// [b][co / 2][oy][ox][co % 2].
template <std::size_t KH, std::size_t KW>
void backward_kernel_pair(const ConvGeometry& g, const double* go_pairs, const PaddedPlanes& in, std::size_t cp,
                          std::size_t ci, double* grad_kernel) {
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    const std::size_t pairs = (g.out_channels + 1) / 2;
    Pair acc[KH * KW] = {};
    for (std::size_t b = 0; b < g.batch; ++b) {
        const double* go = go_pairs + (b * pairs + cp) * oh * ow * 2;
        const double* src = in.plane(b * g.in_channels + ci);
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const double* grow = go + oy * ow * 2;
            const double* rows[KH];
            for (std::size_t ky = 0; ky < KH; ++ky) rows[ky] = src + (oy + ky) * in.cols;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const Pair gv = load_pair(grow + 2 * ox);
                for (std::size_t ky = 0; ky < KH; ++ky)
                    for (std::size_t kx = 0; kx < KW; ++kx) {
                        const double x = rows[ky][ox + kx];
                        const Pair xv = {x, x};
                        acc[ky * KW + kx] += gv * xv;
                    }
            }
        }
    }
    for (std::size_t lane = 0; lane < 2; ++lane) {
        const std::size_t co = cp * 2 + lane;
        if (co >= g.out_channels) break;
        double* dst = grad_kernel + (co * g.in_channels + ci) * KH * KW;
        for (std::size_t t = 0; t < KH * KW; ++t) dst[t] = acc[t][lane];
    }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<double> out) {
    g.validate();
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    if (g.stride == 1) {
        forward_s1(g, input.data(), kernel.data(), out.data());
        return;
    }
    const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.out_channels);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t plane = 0; plane < planes; ++plane) {
        const std::size_t b = static_cast<std::size_t>(plane) / g.out_channels;
        const std::size_t co = static_cast<std::size_t>(plane) % g.out_channels;
        double* dst = out.data() + static_cast<std::size_t>(plane) * oh * ow;
        std::fill(dst, dst + oh * ow, 0.0);
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            const double* src = input.data() + (b * g.in_channels + ci) * g.height * g.width;
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                const Span1d rows = valid_outputs(ky, g.stride, g.padding, g.height, oh);
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    const Span1d cols = valid_outputs(kx, g.stride, g.padding, g.width, ow);
                    const double w = kernel[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
                    for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
                        const double* row = src + (oy * g.stride + ky - g.padding) * g.width;
                        double* orow = dst + oy * ow;
                        for (std::size_t ox = cols.lo; ox < cols.hi; ++ox)
                            orow[ox] += w * row[ox * g.stride + kx - g.padding];
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in) {
    g.validate();
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    if (g.stride == 1 && g.padding < g.kernel_h && g.padding < g.kernel_w) {
        backward_input_s1(g, grad_out.data(), kernel.data(), grad_in.data());
        return;
    }
    const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t plane = 0; plane < planes; ++plane) {
        const std::size_t b = static_cast<std::size_t>(plane) / g.in_channels;
        const std::size_t ci = static_cast<std::size_t>(plane) % g.in_channels;
        double* dst = grad_in.data() + static_cast<std::size_t>(plane) * g.height * g.width;
        std::fill(dst, dst + g.height * g.width, 0.0);
        for (std::size_t co = 0; co < g.out_channels; ++co) {
            const double* go = grad_out.data() + (b * g.out_channels + co) * oh * ow;
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                const Span1d rows = valid_outputs(ky, g.stride, g.padding, g.height, oh);
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    const Span1d cols = valid_outputs(kx, g.stride, g.padding, g.width, ow);
                    const double w = kernel[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
                    for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
                        double* row = dst + (oy * g.stride + ky - g.padding) * g.width;
                        const double* grow = go + oy * ow;
                        for (std::size_t ox = cols.lo; ox < cols.hi; ++ox)
                            row[ox * g.stride + kx - g.padding] += w * grow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_kernel) {
    g.validate();
    const std::size_t oh = g.out_h();
    const std::size_t ow = g.out_w();
    const std::size_t kh = g.kernel_h;
    const std::size_t kw = g.kernel_w;
    const auto pairs = static_cast<std::ptrdiff_t>(g.out_channels * g.in_channels);

    if (g.stride == 1 && ((kh == 3 && kw == 3) || (kh == 1 && kw == 1))) {
        const PaddedPlanes in = pad_planes(input.data(), g.batch * g.in_channels, g.height, g.width, g.padding,
                                           g.height + 2 * g.padding, g.padding, g.width + 2 * g.padding);
        const std::size_t cpairs = (g.out_channels + 1) / 2;
        const std::size_t oplane = oh * ow;
        std::vector<double> go_pairs(g.batch * cpairs * oplane * 2, 0.0);
        for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                const double* src = grad_out.data() + (b * g.out_channels + co) * oplane;
                double* dst = go_pairs.data() + (b * cpairs + co / 2) * oplane * 2 + co % 2;
                for (std::size_t i = 0; i < oplane; ++i) dst[2 * i] = src[i];
            }
        const auto tasks = static_cast<std::ptrdiff_t>(cpairs * g.in_channels);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t t = 0; t < tasks; ++t) {
            const std::size_t cp = static_cast<std::size_t>(t) / g.in_channels;
            const std::size_t ci = static_cast<std::size_t>(t) % g.in_channels;
            if (kh == 3) backward_kernel_pair<3, 3>(g, go_pairs.data(), in, cp, ci, grad_kernel.data());
            else backward_kernel_pair<1, 1>(g, go_pairs.data(), in, cp, ci, grad_kernel.data());
        }
        return;
    }

    // One (co, ci) pair per iteration; every tap owns an accumulator that
    // collects its terms in ascending (b, oy, ox) order.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pair = 0; pair < pairs; ++pair) {
        const std::size_t co = static_cast<std::size_t>(pair) / g.in_channels;
        const std::size_t ci = static_cast<std::size_t>(pair) % g.in_channels;
        std::vector<double> acc(kh * kw, 0.0);
        std::vector<Span1d> cols(kw);
        for (std::size_t kx = 0; kx < kw; ++kx) cols[kx] = valid_outputs(kx, g.stride, g.padding, g.width, ow);
        for (std::size_t b = 0; b < g.batch; ++b) {
            const double* go = grad_out.data() + (b * g.out_channels + co) * oh * ow;
            const double* src = input.data() + (b * g.in_channels + ci) * g.height * g.width;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const Span1d rows = valid_outputs(ky, g.stride, g.padding, g.height, oh);
                double* acc_row = acc.data() + ky * kw;
                for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
                    const double* row = src + (oy * g.stride + ky - g.padding) * g.width;
                    const double* grow = go + oy * ow;
                    if (g.stride == 1 && kw == 3) {
                        // Three independent chains; each still adds in ascending ox.
                        const std::size_t lo = std::max({cols[0].lo, cols[1].lo, cols[2].lo});
                        const std::size_t hi = std::max(lo, std::min({cols[0].hi, cols[1].hi, cols[2].hi}));
                        auto edge = [&](std::size_t ox) {
                            for (std::size_t kx = 0; kx < 3; ++kx)
                                if (ox >= cols[kx].lo && ox < cols[kx].hi) acc_row[kx] += grow[ox] * row[ox + kx - g.padding];
                        };
                        for (std::size_t ox = 0; ox < lo; ++ox) edge(ox);
                        double a0 = acc_row[0];
                        double a1 = acc_row[1];
                        double a2 = acc_row[2];
                        for (std::size_t ox = lo; ox < hi; ++ox) {
                            const double* r = row + (ox - g.padding);
                            a0 += grow[ox] * r[0];
                            a1 += grow[ox] * r[1];
                            a2 += grow[ox] * r[2];
                        }
                        acc_row[0] = a0;
                        acc_row[1] = a1;
                        acc_row[2] = a2;
                        for (std::size_t ox = hi; ox < ow; ++ox) edge(ox);
                    } else {
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            double a = acc_row[kx];
                            for (std::size_t ox = cols[kx].lo; ox < cols[kx].hi; ++ox)
                                a += grow[ox] * row[ox * g.stride + kx - g.padding];
                            acc_row[kx] = a;
                        }
                    }
                }
            }
        }
        for (std::size_t t = 0; t < kh * kw; ++t) grad_kernel[(co * g.in_channels + ci) * kh * kw + t] = acc[t];
    }
}

void softmax(std::size_t outer, std::size_t axis, std::size_t inner, std::span<const double> in,
             std::span<double> out) {
    const auto lanes = static_cast<std::ptrdiff_t>(outer * inner);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t lane = 0; lane < lanes; ++lane) {
        const std::size_t o = static_cast<std::size_t>(lane) / inner;
        const std::size_t i = static_cast<std::size_t>(lane) % inner;
        const double* src = in.data() + o * axis * inner + i;
        double* dst = out.data() + o * axis * inner + i;
        double peak = src[0];
        for (std::size_t k = 1; k < axis; ++k) peak = std::max(peak, src[k * inner]);
        double total = 0.0;
        for (std::size_t k = 0; k < axis; ++k) {
            dst[k * inner] = std::exp(src[k * inner] - peak);
            total += dst[k * inner];
        }
        for (std::size_t k = 0; k < axis; ++k) dst[k * inner] /= total;
    }
}

namespace {

inline double kl_at(const double* p, const double* q, std::size_t classes, std::size_t stride) {
    double acc = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double pk = p[k * stride];
        if (pk > 0.0) acc += pk * std::log2(pk / std::max(q[k * stride], kLogEpsilon));
    }
    return acc;
}

inline double js_at(const double* p, const double* q, std::size_t classes, std::size_t stride) {
    double kl_p = 0.0;
    double kl_q = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double pk = p[k * stride];
        const double qk = q[k * stride];
        const double m = (pk + qk) * 0.5;
        if (pk > 0.0) kl_p += pk * std::log2(pk / m);
        if (qk > 0.0) kl_q += qk * std::log2(qk / m);
    }
    return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

}  // namespace

void kl_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(g.batch * g.pixels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
        const std::size_t b = static_cast<std::size_t>(idx) / g.pixels;
        const std::size_t px = static_cast<std::size_t>(idx) % g.pixels;
        const std::size_t base = b * g.classes * g.pixels + px;
        out[static_cast<std::size_t>(idx)] = kl_at(p.data() + base, q.data() + base, g.classes, g.pixels);
    }
}

void js_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(g.batch * g.pixels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
        const std::size_t b = static_cast<std::size_t>(idx) / g.pixels;
        const std::size_t px = static_cast<std::size_t>(idx) % g.pixels;
        const std::size_t base = b * g.classes * g.pixels + px;
        out[static_cast<std::size_t>(idx)] = js_at(p.data() + base, q.data() + base, g.classes, g.pixels);
    }
}

void consensus_labels(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
                      double kappa, std::span<std::int32_t> out) {
    const auto n = static_cast<std::ptrdiff_t>(g.batch * g.pixels);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
        const std::size_t b = static_cast<std::size_t>(idx) / g.pixels;
        const std::size_t px = static_cast<std::size_t>(idx) % g.pixels;
        const std::size_t base = b * g.classes * g.pixels + px;
        const double* pp = p.data() + base;
        const double* qq = q.data() + base;
        std::int32_t label = 0;
        if (js_at(pp, qq, g.classes, g.pixels) < kappa) {
            double best = -1.0;
            for (std::size_t k = 0; k < g.classes; ++k) {
                const double mean = (pp[k * g.pixels] + qq[k * g.pixels]) * 0.5;
                if (mean > best) {
                    best = mean;
                    label = static_cast<std::int32_t>(k);
                }
            }
        }
        out[static_cast<std::size_t>(idx)] = label;
    }
}

}  // namespace dtsl::kernels

#include "dtsl/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace dtsl::kernels::reference {

namespace {

std::size_t in_index(const ConvGeometry& g, std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return ((b * g.in_channels + c) * g.height + y) * g.width + x;
}

std::size_t out_index(const ConvGeometry& g, std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return ((b * g.out_channels + c) * g.out_h() + y) * g.out_w() + x;
}

std::size_t w_index(const ConvGeometry& g, std::size_t co, std::size_t ci, std::size_t ky, std::size_t kx) {
    return ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
}

// Input coordinate for output position `o` and tap `k`, or false if it lands in padding.
bool source(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent,
            std::size_t& src) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
    if (s < 0 || s >= static_cast<std::ptrdiff_t>(extent)) return false;
    src = static_cast<std::size_t>(s);
    return true;
}

double kl_pixel(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q, std::size_t b,
                std::size_t px) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.classes; ++k) {
        const std::size_t i = (b * g.classes + k) * g.pixels + px;
        if (p[i] > 0.0) acc += p[i] * std::log2(p[i] / std::max(q[i], kLogEpsilon));
    }
    return acc;
}

double js_pixel(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q, std::size_t b,
                std::size_t px) {
    double kl_p = 0.0;
    double kl_q = 0.0;
    for (std::size_t k = 0; k < g.classes; ++k) {
        const std::size_t i = (b * g.classes + k) * g.pixels + px;
        const double m = (p[i] + q[i]) * 0.5;
        if (p[i] > 0.0) kl_p += p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log2(q[i] / m);
    }
    // Rounding can leave a tiny negative value for near-identical inputs.
    return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<double> out) {
    g.validate();
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t oy = 0; oy < g.out_h(); ++oy)
                for (std::size_t ox = 0; ox < g.out_w(); ++ox) {
                    double acc = 0.0;
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                std::size_t iy = 0;
                                std::size_t ix = 0;
                                if (!source(oy, ky, g.stride, g.padding, g.height, iy)) continue;
                                if (!source(ox, kx, g.stride, g.padding, g.width, ix)) continue;
                                acc += kernel[w_index(g, co, ci, ky, kx)] * input[in_index(g, b, ci, iy, ix)];
                            }
                    out[out_index(g, b, co, oy, ox)] = acc;
                }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in) {
    g.validate();
    std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t co = 0; co < g.out_channels; ++co)
                for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                    for (std::size_t kx = 0; kx < g.kernel_w; ++kx)
                        for (std::size_t oy = 0; oy < g.out_h(); ++oy)
                            for (std::size_t ox = 0; ox < g.out_w(); ++ox) {
                                std::size_t iy = 0;
                                std::size_t ix = 0;
                                if (!source(oy, ky, g.stride, g.padding, g.height, iy)) continue;
                                if (!source(ox, kx, g.stride, g.padding, g.width, ix)) continue;
                                grad_in[in_index(g, b, ci, iy, ix)] +=
                                    kernel[w_index(g, co, ci, ky, kx)] * grad_out[out_index(g, b, co, oy, ox)];
                            }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_kernel) {
    g.validate();
    for (std::size_t co = 0; co < g.out_channels; ++co)
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    double acc = 0.0;
                    for (std::size_t b = 0; b < g.batch; ++b)
                        for (std::size_t oy = 0; oy < g.out_h(); ++oy)
                            for (std::size_t ox = 0; ox < g.out_w(); ++ox) {
                                std::size_t iy = 0;
                                std::size_t ix = 0;
                                if (!source(oy, ky, g.stride, g.padding, g.height, iy)) continue;
                                if (!source(ox, kx, g.stride, g.padding, g.width, ix)) continue;
                                acc += grad_out[out_index(g, b, co, oy, ox)] * input[in_index(g, b, ci, iy, ix)];
                            }
                    grad_kernel[w_index(g, co, ci, ky, kx)] = acc;
                }
}

void softmax(std::size_t outer, std::size_t axis, std::size_t inner, std::span<const double> in,
             std::span<double> out) {
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * axis * inner + i;
            double peak = in[base];
            for (std::size_t k = 1; k < axis; ++k) peak = std::max(peak, in[base + k * inner]);
            double total = 0.0;
            for (std::size_t k = 0; k < axis; ++k) {
                out[base + k * inner] = std::exp(in[base + k * inner] - peak);
                total += out[base + k * inner];
            }
            for (std::size_t k = 0; k < axis; ++k) out[base + k * inner] /= total;
        }
}

void kl_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out) {
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t px = 0; px < g.pixels; ++px) out[b * g.pixels + px] = kl_pixel(g, p, q, b, px);
}

void js_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out) {
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t px = 0; px < g.pixels; ++px) out[b * g.pixels + px] = js_pixel(g, p, q, b, px);
}

void consensus_labels(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
                      double kappa, std::span<std::int32_t> out) {
    for (std::size_t b = 0; b < g.batch; ++b)
        for (std::size_t px = 0; px < g.pixels; ++px) {
            std::int32_t label = 0;
            if (js_pixel(g, p, q, b, px) < kappa) {
                double best = -1.0;
                for (std::size_t k = 0; k < g.classes; ++k) {
                    const std::size_t i = (b * g.classes + k) * g.pixels + px;
                    const double mean = (p[i] + q[i]) * 0.5;
                    if (mean > best) {
                        best = mean;
                        label = static_cast<std::int32_t>(k);
                    }
                }
            }
            out[b * g.pixels + px] = label;
        }
}

}  // namespace dtsl::kernels::reference

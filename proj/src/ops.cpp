#include "dtsl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dtsl/kernels.hpp"

namespace dtsl {

using detail::make_result;
using detail::Node;

namespace {

Node& input_node(Node& self, std::size_t i) { return *self.inputs[i]; }

// Adds `g` into an input's grad buffer if that input takes part in backward.
template <typename F>
void accumulate(Node& in, F&& contribution) {
    if (!in.requires_grad) return;
    in.ensure_grad();
    contribution(in.grad);
}

struct Broadcast {
    Shape shape;
    bool a_scalar = false;
    bool b_scalar = false;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return {a.shape(), false, false};
    if (b.numel() == 1) return {a.shape(), false, true};
    if (a.numel() == 1) return {b.shape(), true, false};
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
    const Broadcast bc = broadcast(a, b, op);
    const std::size_t n = shape_numel(bc.shape);
    auto av = a.node()->data;
    auto bv = b.node()->data;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd((*av)[bc.a_scalar ? 0 : i], (*bv)[bc.b_scalar ? 0 : i]);
    return make_result(
        bc.shape, std::move(out), {a, b},
        [bc, av, bv, n, da, db](Node& self) {
            const auto& g = self.grad;
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = (*av)[bc.a_scalar ? 0 : i];
                    const double y = (*bv)[bc.b_scalar ? 0 : i];
                    ga[bc.a_scalar ? 0 : i] += g[i] * da(x, y);
                }
            });
            accumulate(input_node(self, 1), [&](std::vector<double>& gb) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = (*av)[bc.a_scalar ? 0 : i];
                    const double y = (*bv)[bc.b_scalar ? 0 : i];
                    gb[bc.b_scalar ? 0 : i] += g[i] * db(x, y);
                }
            });
        },
        op);
}

// Unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename D>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, D deriv) {
    auto av = a.node()->data;
    std::vector<double> out(av->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd((*av)[i]);
    auto result = make_result(a.shape(), std::move(out), {a}, nullptr, op);
    if (result.requires_grad()) {
        // The closure needs the output values; capture them through the node's own storage.
        result.node()->backward = [av, deriv](Node& self) {
            const auto& y = *self.data;
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * deriv((*av)[i], y[i]);
            });
        };
    }
    return result;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.dim() != rank) {
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                    shape_to_string(t.shape()));
    }
}

struct AxisView {
    std::size_t outer = 1;
    std::size_t axis = 1;
    std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis, const char* op) {
    if (axis >= s.size()) throw std::invalid_argument(std::string(op) + ": axis out of range");
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    v.axis = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double y : b.data()) {
        if (y == 0.0) throw std::domain_error("div: division by zero");
    }
    return binary(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor rsub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }

Tensor exp(const Tensor& a) {
    return unary(
        a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double x : a.data()) {
        if (!(x > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(x) + " (clamp first)");
    }
    return unary(
        a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& a, double floor) {
    return unary(
        a, "clamp_min", [floor](double x) { return std::max(x, floor); },
        [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double x : a.data()) acc += x;
    return make_result(
        {1}, {acc}, {a},
        [](Node& self) {
            const double g = self.grad[0];
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                for (double& v : ga) v += g;
            });
        },
        "sum");
}

Tensor mean(const Tensor& a) { return mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_axis(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis, "sum_axis");
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape.push_back(1);
    std::vector<double> out(v.outer * v.inner, 0.0);
    const auto x = a.data();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t k = 0; k < v.axis; ++k)
            for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += x[(o * v.axis + k) * v.inner + i];
    return make_result(
        std::move(out_shape), std::move(out), {a},
        [v](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t k = 0; k < v.axis; ++k)
                        for (std::size_t i = 0; i < v.inner; ++i)
                            ga[(o * v.axis + k) * v.inner + i] += self.grad[o * v.inner + i];
            });
        },
        "sum_axis");
}

Tensor sum_except_axis(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view(a.shape(), axis, "sum_except_axis");
    std::vector<double> out(v.axis, 0.0);
    const auto x = a.data();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t k = 0; k < v.axis; ++k)
            for (std::size_t i = 0; i < v.inner; ++i) out[k] += x[(o * v.axis + k) * v.inner + i];
    return make_result(
        {v.axis}, std::move(out), {a},
        [v](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t k = 0; k < v.axis; ++k)
                        for (std::size_t i = 0; i < v.inner; ++i) ga[(o * v.axis + k) * v.inner + i] += self.grad[k];
            });
        },
        "sum_except_axis");
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
    const AxisView v = axis_view(logits.shape(), axis, "softmax");
    for (double x : logits.data()) {
        if (std::isnan(x)) throw std::domain_error("softmax: NaN input");
    }
    std::vector<double> out(logits.numel());
    kernels::softmax(v.outer, v.axis, v.inner, logits.data(), out);
    auto result = make_result(logits.shape(), std::move(out), {logits}, nullptr, "softmax");
    if (result.requires_grad()) {
        result.node()->backward = [v](Node& self) {
            const auto& y = *self.data;
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                // dx_k = y_k * (g_k - sum_j g_j y_j)
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t i = 0; i < v.inner; ++i) {
                        const std::size_t base = o * v.axis * v.inner + i;
                        double dot = 0.0;
                        for (std::size_t k = 0; k < v.axis; ++k)
                            dot += self.grad[base + k * v.inner] * y[base + k * v.inner];
                        for (std::size_t k = 0; k < v.axis; ++k) {
                            const std::size_t j = base + k * v.inner;
                            ga[j] += y[j] * (self.grad[j] - dot);
                        }
                    }
            });
        };
    }
    return result;
}

Tensor log_softmax(const Tensor& logits, std::size_t axis) {
    const AxisView v = axis_view(logits.shape(), axis, "log_softmax");
    const auto x = logits.data();
    std::vector<double> out(logits.numel());
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.axis * v.inner + i;
            double peak = x[base];
            for (std::size_t k = 0; k < v.axis; ++k) {
                if (std::isnan(x[base + k * v.inner])) throw std::domain_error("log_softmax: NaN input");
                peak = std::max(peak, x[base + k * v.inner]);
            }
            double total = 0.0;
            for (std::size_t k = 0; k < v.axis; ++k) total += std::exp(x[base + k * v.inner] - peak);
            const double lse = peak + std::log(total);
            for (std::size_t k = 0; k < v.axis; ++k) out[base + k * v.inner] = x[base + k * v.inner] - lse;
        }
    return make_result(
        logits.shape(), std::move(out), {logits},
        [v](Node& self) {
            const auto& y = *self.data;
            accumulate(input_node(self, 0), [&](std::vector<double>& ga) {
                // dx_k = g_k - softmax_k * sum_j g_j
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t i = 0; i < v.inner; ++i) {
                        const std::size_t base = o * v.axis * v.inner + i;
                        double total = 0.0;
                        for (std::size_t k = 0; k < v.axis; ++k) total += self.grad[base + k * v.inner];
                        for (std::size_t k = 0; k < v.axis; ++k) {
                            const std::size_t j = base + k * v.inner;
                            ga[j] += self.grad[j] - std::exp(y[j]) * total;
                        }
                    }
            });
        },
        "log_softmax");
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
    require_rank(input, 4, "conv2d");
    require_rank(kernel, 4, "conv2d");
    if (input.size(1) != kernel.size(1)) {
        throw std::invalid_argument("conv2d: input channels " + std::to_string(input.size(1)) +
                                    " != kernel channels " + std::to_string(kernel.size(1)));
    }
    kernels::ConvGeometry g;
    g.batch = input.size(0);
    g.in_channels = input.size(1);
    g.height = input.size(2);
    g.width = input.size(3);
    g.out_channels = kernel.size(0);
    g.kernel_h = kernel.size(2);
    g.kernel_w = kernel.size(3);
    g.stride = stride;
    g.padding = padding;
    g.validate();
    std::vector<double> out(g.batch * g.out_channels * g.out_h() * g.out_w());
    kernels::conv2d_forward(g, input.data(), kernel.data(), out);
    auto in_data = input.node()->data;
    auto w_data = kernel.node()->data;
    return make_result(
        {g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(out), {input, kernel},
        [g, in_data, w_data](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& gi) {
                std::vector<double> tmp(gi.size());
                kernels::conv2d_backward_input(g, self.grad, *w_data, tmp);
                for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += tmp[i];
            });
            accumulate(input_node(self, 1), [&](std::vector<double>& gw) {
                std::vector<double> tmp(gw.size());
                kernels::conv2d_backward_kernel(g, self.grad, *in_data, tmp);
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += tmp[i];
            });
        },
        "conv2d");
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
    require_rank(input, 4, "add_channel_bias");
    if (bias.dim() != 1 || bias.size(0) != input.size(1)) {
        throw std::invalid_argument("add_channel_bias: bias shape " + shape_to_string(bias.shape()) +
                                    " does not match channels of " + shape_to_string(input.shape()));
    }
    const std::size_t batch = input.size(0);
    const std::size_t channels = input.size(1);
    const std::size_t plane = input.size(2) * input.size(3);
    const auto x = input.data();
    const auto bv = bias.data();
    std::vector<double> out(x.size());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) out[base + i] = x[base + i] + bv[c];
        }
    return make_result(
        input.shape(), std::move(out), {input, bias},
        [batch, channels, plane](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& gi) {
                for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
            });
            accumulate(input_node(self, 1), [&](std::vector<double>& gb) {
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t c = 0; c < channels; ++c) {
                        const std::size_t base = (b * channels + c) * plane;
                        double acc = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) acc += self.grad[base + i];
                        gb[c] += acc;
                    }
            });
        },
        "add_channel_bias");
}

Tensor upsample_nearest2x(const Tensor& input) {
    require_rank(input, 4, "upsample_nearest2x");
    const std::size_t planes = input.size(0) * input.size(1);
    const std::size_t h = input.size(2);
    const std::size_t w = input.size(3);
    const auto x = input.data();
    std::vector<double> out(planes * 4 * h * w);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx)
                out[(p * 2 * h + y) * 2 * w + xx] = x[(p * h + y / 2) * w + xx / 2];
    return make_result(
        {input.size(0), input.size(1), 2 * h, 2 * w}, std::move(out), {input},
        [planes, h, w](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& gi) {
                for (std::size_t p = 0; p < planes; ++p)
                    for (std::size_t y = 0; y < 2 * h; ++y)
                        for (std::size_t xx = 0; xx < 2 * w; ++xx)
                            gi[(p * h + y / 2) * w + xx / 2] += self.grad[(p * 2 * h + y) * 2 * w + xx];
            });
        },
        "upsample_nearest2x");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 4, "concat_channels");
    require_rank(b, 4, "concat_channels");
    if (a.size(0) != b.size(0) || a.size(2) != b.size(2) || a.size(3) != b.size(3)) {
        throw std::invalid_argument("concat_channels: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
    const std::size_t batch = a.size(0);
    const std::size_t ca = a.size(1) * a.size(2) * a.size(3);
    const std::size_t cb = b.size(1) * b.size(2) * b.size(3);
    const auto xa = a.data();
    const auto xb = b.data();
    std::vector<double> out;
    out.reserve(batch * (ca + cb));
    for (std::size_t n = 0; n < batch; ++n) {
        out.insert(out.end(), xa.begin() + static_cast<std::ptrdiff_t>(n * ca),
                   xa.begin() + static_cast<std::ptrdiff_t>((n + 1) * ca));
        out.insert(out.end(), xb.begin() + static_cast<std::ptrdiff_t>(n * cb),
                   xb.begin() + static_cast<std::ptrdiff_t>((n + 1) * cb));
    }
    return make_result(
        {batch, a.size(1) + b.size(1), a.size(2), a.size(3)}, std::move(out), {a, b},
        [batch, ca, cb](Node& self) {
            accumulate(input_node(self, 0), [&](std::vector<double>& g) {
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t i = 0; i < ca; ++i) g[n * ca + i] += self.grad[n * (ca + cb) + i];
            });
            accumulate(input_node(self, 1), [&](std::vector<double>& g) {
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t i = 0; i < cb; ++i) g[n * cb + i] += self.grad[n * (ca + cb) + ca + i];
            });
        },
        "concat_channels");
}

}  // namespace dtsl

#pragma once

// Raw numeric kernels on contiguous float64 buffers.
//
// Two implementations share every signature: the OpenMP-parallel kernels in
// dtsl::kernels used by the library, and the plain serial loops in
// dtsl::kernels::reference that the tests and benchmarks compare against.
// Each output element is owned by exactly one loop iteration and is summed in
// the same order in both versions, so results are bit-identical regardless of
// thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace dtsl::kernels {

inline constexpr double kLogEpsilon = 1e-12;

struct ConvGeometry {
    std::size_t batch = 0;
    std::size_t in_channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
    // Throws std::invalid_argument if the output size is not integral or the
    // kernel does not fit the padded input.
    void validate() const;
};

// Per-pixel layout for categorical maps: [batch, classes, pixels].
struct ClassMapGeometry {
    std::size_t batch = 0;
    std::size_t classes = 0;
    std::size_t pixels = 0;
};

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<double> out);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_kernel);

// Softmax over the middle axis of an [outer, axis, inner] view.
void softmax(std::size_t outer, std::size_t axis, std::size_t inner, std::span<const double> in,
             std::span<double> out);

// Base-2 KL(p || q) per pixel; 0 log 0 := 0, q clamped below at kLogEpsilon.
void kl_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out);
// Base-2 Jensen-Shannon divergence per pixel.
void js_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out);
// js < kappa: argmax of (p + q) / 2 with lowest-index ties, else class 0.
void consensus_labels(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
                      double kappa, std::span<std::int32_t> out);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<double> out);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> kernel, std::span<double> grad_in);
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_kernel);
void softmax(std::size_t outer, std::size_t axis, std::size_t inner, std::span<const double> in,
             std::span<double> out);
void kl_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out);
void js_field(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
              std::span<double> out);
void consensus_labels(const ClassMapGeometry& g, std::span<const double> p, std::span<const double> q,
                      double kappa, std::span<std::int32_t> out);

}  // namespace reference

}  // namespace dtsl::kernels

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dtsl/tensor.hpp"

namespace dtsl {

// Two miniature encoder/decoder segmentation networks that share a skeleton
// (two 2x downsampling stages, skip concatenation, nearest-neighbour
// upsampling) and differ in their conv blocks: PlainConvNet stacks two
// conv+ReLU layers, ResidualConvNet adds the block input back before the
// second activation.
enum class ArchitectureKind { PlainConvNet, ResidualConvNet };

std::string_view to_string(ArchitectureKind kind);
ArchitectureKind parse_architecture(std::string_view name);

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct ModelParams {
    ArchitectureKind architecture = ArchitectureKind::PlainConvNet;
    std::size_t num_classes = 0;
    std::size_t base_channels = 0;
    std::vector<NamedTensor> tensors;

    const Tensor& get(std::string_view name) const;
    // Deep copy; the copy's tensors are leaves with the given requires_grad.
    ModelParams clone(bool requires_grad) const;
    // Same architecture, class count, width and parameter names/shapes.
    bool compatible_with(const ModelParams& other) const;
    std::size_t parameter_count() const;
    void zero_grad();
};

inline constexpr std::size_t kDefaultBaseChannels = 8;

// Kernels ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
ModelParams init_params(ArchitectureKind kind, std::size_t num_classes, std::size_t base_channels,
                        std::uint64_t seed);

// images [B,1,H,W] with H, W divisible by 4 -> logits [B,K,H,W].
Tensor forward(const ModelParams& params, const Tensor& images);

}  // namespace dtsl

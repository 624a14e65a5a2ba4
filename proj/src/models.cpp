#include "dtsl/models.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dtsl/ops.hpp"

namespace dtsl {

std::string_view to_string(ArchitectureKind kind) {
    switch (kind) {
        case ArchitectureKind::PlainConvNet:
            return "PlainConvNet";
        case ArchitectureKind::ResidualConvNet:
            return "ResidualConvNet";
    }
    throw std::invalid_argument("unknown ArchitectureKind");
}

ArchitectureKind parse_architecture(std::string_view name) {
    if (name == "PlainConvNet") return ArchitectureKind::PlainConvNet;
    if (name == "ResidualConvNet") return ArchitectureKind::ResidualConvNet;
    throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

const Tensor& ModelParams::get(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw std::out_of_range("ModelParams: no parameter named '" + std::string(name) + "'");
}

ModelParams ModelParams::clone(bool requires_grad) const {
    ModelParams copy;
    copy.architecture = architecture;
    copy.num_classes = num_classes;
    copy.base_channels = base_channels;
    copy.tensors.reserve(tensors.size());
    for (const auto& t : tensors) copy.tensors.push_back({t.name, t.value.clone(requires_grad)});
    return copy;
}

bool ModelParams::compatible_with(const ModelParams& other) const {
    if (architecture != other.architecture || num_classes != other.num_classes ||
        base_channels != other.base_channels || tensors.size() != other.tensors.size()) {
        return false;
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name != other.tensors[i].name || tensors[i].value.shape() != other.tensors[i].value.shape()) {
            return false;
        }
    }
    return true;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.value.numel();
    return n;
}

void ModelParams::zero_grad() {
    for (auto& t : tensors) t.value.zero_grad();
}

namespace {

struct ConvSpec {
    const char* name;
    std::size_t out_mult;  // multiples of base channels; 0 means num_classes
    std::size_t in_mult;   // multiples of base channels; 0 means the single image channel
    std::size_t kernel;
};

// Order fixes both the parameter layout and the RNG draw order.
constexpr ConvSpec kLayers[] = {
    {"enc1.a", 1, 0, 3}, {"enc1.b", 1, 1, 3}, {"down1", 1, 1, 2}, {"enc2.a", 2, 1, 3}, {"enc2.b", 2, 2, 3},
    {"down2", 2, 2, 2},  {"mid.a", 4, 2, 3},  {"mid.b", 4, 4, 3}, {"dec2.a", 2, 6, 3}, {"dec2.b", 2, 2, 3},
    {"dec1.a", 1, 3, 3}, {"dec1.b", 1, 1, 3}, {"head", 0, 1, 1},
};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor conv_layer(const ModelParams& p, const std::string& name, const Tensor& x, std::size_t stride,
                  std::size_t padding) {
    return add_channel_bias(conv2d(x, p.get(name + ".weight"), stride, padding), p.get(name + ".bias"));
}

Tensor block(const ModelParams& p, const std::string& name, const Tensor& x) {
    Tensor h = relu(conv_layer(p, name + ".a", x, 1, 1));
    Tensor y = conv_layer(p, name + ".b", h, 1, 1);
    if (p.architecture == ArchitectureKind::ResidualConvNet) y = add(h, y);
    return relu(y);
}

}  // namespace

ModelParams init_params(ArchitectureKind kind, std::size_t num_classes, std::size_t base_channels,
                        std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("init_params: num_classes must be >= 2");
    if (base_channels < 4) throw std::invalid_argument("init_params: base_channels must be >= 4");
    ModelParams params;
    params.architecture = kind;
    params.num_classes = num_classes;
    params.base_channels = base_channels;
    std::mt19937_64 rng(seed);
    for (const ConvSpec& spec : kLayers) {
        const std::size_t out = spec.out_mult == 0 ? num_classes : spec.out_mult * base_channels;
        const std::size_t in = spec.in_mult == 0 ? 1 : spec.in_mult * base_channels;
        const std::size_t fan_in = in * spec.kernel * spec.kernel;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<double> w(out * fan_in);
        for (double& v : w) v = (2.0 * uniform01(rng) - 1.0) * bound;
        params.tensors.push_back(
            {std::string(spec.name) + ".weight", Tensor({out, in, spec.kernel, spec.kernel}, std::move(w), true)});
        params.tensors.push_back({std::string(spec.name) + ".bias", Tensor::zeros({out}, true)});
    }
    return params;
}

Tensor forward(const ModelParams& p, const Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 1) {
        throw std::invalid_argument("forward: expected images [B,1,H,W], got " + shape_to_string(images.shape()));
    }
    if (images.size(2) % 4 != 0 || images.size(3) % 4 != 0) {
        throw std::invalid_argument("forward: H and W must be divisible by 4, got " +
                                    shape_to_string(images.shape()));
    }
    Tensor s1 = block(p, "enc1", images);
    Tensor x = relu(conv_layer(p, "down1", s1, 2, 0));
    Tensor s2 = block(p, "enc2", x);
    x = relu(conv_layer(p, "down2", s2, 2, 0));
    x = block(p, "mid", x);
    x = block(p, "dec2", concat_channels(upsample_nearest2x(x), s2));
    x = block(p, "dec1", concat_channels(upsample_nearest2x(x), s1));
    return conv_layer(p, "head", x, 1, 0);
}

}  // namespace dtsl

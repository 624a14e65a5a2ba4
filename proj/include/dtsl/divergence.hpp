#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dtsl/label_map.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

// Per-pixel categorical distribution, values [B,K,H,W] summing to 1 over K.
class ProbMap {
public:
    // Validates rank, non-negativity and the class-axis sum (within 1e-9).
    explicit ProbMap(Tensor values);
    static ProbMap from_logits(const Tensor& logits);

    const Tensor& values() const { return values_; }
    std::size_t batch() const { return values_.size(0); }
    std::size_t classes() const { return values_.size(1); }
    std::size_t height() const { return values_.size(2); }
    std::size_t width() const { return values_.size(3); }

    ProbMap detached() const { return ProbMap(values_.detach()); }

private:
    Tensor values_;
};

// Base-2 JS divergence per pixel, layout [B,H,W], values in [0,1].
struct DivergenceField {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;
};

// Exclusive partition of the pixels into consistent (js < kappa) and
// inconsistent (js >= kappa) sets.
struct ConsistencyMask {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    double kappa = 0.0;
    std::vector<std::uint8_t> cons;
    std::vector<std::uint8_t> diff;

    double cons_fraction() const;
};

enum class ClgStrategy { Default, Strategy1, Strategy2, Strategy3 };

std::string_view to_string(ClgStrategy s);
ClgStrategy parse_strategy(std::string_view name);

// Base-2 KL(p || q) per pixel as a [B,H,W] tensor (no gradient).
Tensor kl_pixelwise(const ProbMap& p, const ProbMap& q);
DivergenceField js_divergence(const ProbMap& o1, const ProbMap& o2);
ConsistencyMask make_masks(const DivergenceField& js, double kappa);

// Consensus label generator: argmax of the mean distribution where the two
// maps agree (js < kappa), background class 0 elsewhere.
LabelMap clg(const ProbMap& o1, const ProbMap& o2, double kappa);
// Three-way consensus: consistent iff all pairwise js < kappa; label is the
// argmax of the three-way mean there, class 0 elsewhere.
LabelMap clg_three_way(const ProbMap& a, const ProbMap& b, const ProbMap& c, double kappa);
// Mask-free pairing used by the Plain-DTSL ablation.
LabelMap argmax_of_mean(const ProbMap& o1, const ProbMap& o2);
LabelMap argmax(const ProbMap& p);

struct GroupOutputs {
    const ProbMap& student0;
    const ProbMap& student1;
    const ProbMap& teacher0;
    const ProbMap& teacher1;
};

// Pseudo-labels for the student of `target_group` under an ablation strategy.
// Group 1 uses the same rule with the group indices swapped.
LabelMap clg_strategy(ClgStrategy strategy, const GroupOutputs& outputs, int target_group, double kappa);

}  // namespace dtsl

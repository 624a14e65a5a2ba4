#pragma once

#include <cstddef>
#include <vector>

#include "dtsl/models.hpp"

namespace dtsl {

// Poly decay: eta0 * (1 - iter / max_iter)^0.9, for 0 <= iter <= max_iter.
double lr_schedule(double eta0, std::size_t iter, std::size_t max_iter);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adaptive-moment optimizer bound to one student's parameters.
class Adam {
public:
    explicit Adam(const ModelParams& params, AdamConfig config = {});

    // Applies one bias-corrected update with learning rate `lr` using the
    // currently accumulated gradients; parameters without a grad are skipped.
    void step(double lr);

    std::size_t steps() const { return step_count_; }
    const std::vector<Tensor>& parameters() const { return params_; }
    bool owns(const Tensor& t) const;

private:
    AdamConfig config_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::size_t step_count_ = 0;
};

}  // namespace dtsl

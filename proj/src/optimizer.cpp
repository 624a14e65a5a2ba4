#include "dtsl/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dtsl {

double lr_schedule(double eta0, std::size_t iter, std::size_t max_iter) {
    if (max_iter == 0) throw std::invalid_argument("lr_schedule: max_iter must be positive");
    if (iter > max_iter) {
        throw std::invalid_argument("lr_schedule: iter " + std::to_string(iter) + " exceeds max_iter " +
                                    std::to_string(max_iter));
    }
    const double progress = static_cast<double>(iter) / static_cast<double>(max_iter);
    return eta0 * std::pow(1.0 - progress, 0.9);
}

Adam::Adam(const ModelParams& params, AdamConfig config) : config_(config) {
    for (const auto& t : params.tensors) {
        if (!t.value.requires_grad()) throw std::invalid_argument("Adam: parameter '" + t.name + "' does not require grad");
        params_.push_back(t.value);
        first_moment_.emplace_back(t.value.numel(), 0.0);
        second_moment_.emplace_back(t.value.numel(), 0.0);
    }
}

void Adam::step(double lr) {
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) continue;
        const auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = first_moment_[i];
        auto& v = second_moment_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            w[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

bool Adam::owns(const Tensor& t) const {
    for (const auto& p : params_) {
        if (p.node() == t.node()) return true;
    }
    return false;
}

}  // namespace dtsl

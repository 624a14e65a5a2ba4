#pragma once

#include "dtsl/models.hpp"

namespace dtsl {

struct EmaConfig {
    double omega = 0.95;
};

// teacher <- omega * teacher + (1 - omega) * student, elementwise, in place.
// Throws std::invalid_argument for omega outside [0,1] or mismatched structures.
void ema_update(ModelParams& teacher, const ModelParams& student, double omega);

// Copy of the student that never requires gradients.
ModelParams make_teacher(const ModelParams& student);

}  // namespace dtsl

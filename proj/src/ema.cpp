#include "dtsl/ema.hpp"

#include <stdexcept>
#include <string>

namespace dtsl {

void ema_update(ModelParams& teacher, const ModelParams& student, double omega) {
    if (!(omega >= 0.0 && omega <= 1.0)) {
        throw std::invalid_argument("ema_update: omega must lie in [0,1], got " + std::to_string(omega));
    }
    if (!teacher.compatible_with(student)) throw std::invalid_argument("ema_update: incompatible parameter sets");
    for (std::size_t i = 0; i < teacher.tensors.size(); ++i) {
        Tensor& t = teacher.tensors[i].value;
        if (t.requires_grad()) throw std::logic_error("ema_update: teacher parameters must not require grad");
        auto dst = t.mutable_data();
        const auto src = student.tensors[i].value.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = omega * dst[j] + (1.0 - omega) * src[j];
    }
}

ModelParams make_teacher(const ModelParams& student) { return student.clone(false); }

}  // namespace dtsl

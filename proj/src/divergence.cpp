#include "dtsl/divergence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dtsl/kernels.hpp"
#include "dtsl/ops.hpp"

namespace dtsl {

ProbMap::ProbMap(Tensor values) : values_(std::move(values)) {
    if (!values_.defined() || values_.dim() != 4) {
        throw std::invalid_argument("ProbMap: expected [B,K,H,W] values");
    }
    const std::size_t k = values_.size(1);
    const std::size_t plane = values_.size(2) * values_.size(3);
    const auto v = values_.data();
    for (std::size_t b = 0; b < values_.size(0); ++b)
        for (std::size_t px = 0; px < plane; ++px) {
            double total = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double x = v[(b * k + c) * plane + px];
                if (!(x >= 0.0)) throw std::invalid_argument("ProbMap: negative or NaN probability");
                total += x;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw std::invalid_argument("ProbMap: class probabilities sum to " + std::to_string(total));
            }
        }
}

ProbMap ProbMap::from_logits(const Tensor& logits) { return ProbMap(softmax(logits, 1)); }

double ConsistencyMask::cons_fraction() const {
    if (cons.empty()) return 0.0;
    std::size_t n = 0;
    for (auto c : cons) n += c;
    return static_cast<double>(n) / static_cast<double>(cons.size());
}

std::string_view to_string(ClgStrategy s) {
    switch (s) {
        case ClgStrategy::Default:
            return "default";
        case ClgStrategy::Strategy1:
            return "strategy1";
        case ClgStrategy::Strategy2:
            return "strategy2";
        case ClgStrategy::Strategy3:
            return "strategy3";
    }
    throw std::invalid_argument("unknown ClgStrategy");
}

ClgStrategy parse_strategy(std::string_view name) {
    if (name == "default") return ClgStrategy::Default;
    if (name == "strategy1" || name == "s1" || name == "1") return ClgStrategy::Strategy1;
    if (name == "strategy2" || name == "s2" || name == "2") return ClgStrategy::Strategy2;
    if (name == "strategy3" || name == "s3" || name == "3") return ClgStrategy::Strategy3;
    throw std::invalid_argument("unknown CLG strategy '" + std::string(name) + "'");
}

namespace {

kernels::ClassMapGeometry geometry_of(const ProbMap& p, const ProbMap& q) {
    if (p.values().shape() != q.values().shape()) {
        throw std::invalid_argument("divergence: shape mismatch " + shape_to_string(p.values().shape()) + " vs " +
                                    shape_to_string(q.values().shape()));
    }
    return {p.batch(), p.classes(), p.height() * p.width()};
}

void check_kappa(double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) {
        throw std::invalid_argument("kappa must lie in [0,1], got " + std::to_string(kappa));
    }
}

}  // namespace

Tensor kl_pixelwise(const ProbMap& p, const ProbMap& q) {
    const auto g = geometry_of(p, q);
    std::vector<double> out(g.batch * g.pixels);
    kernels::kl_field(g, p.values().data(), q.values().data(), out);
    return Tensor({p.batch(), p.height(), p.width()}, std::move(out));
}

DivergenceField js_divergence(const ProbMap& o1, const ProbMap& o2) {
    const auto g = geometry_of(o1, o2);
    DivergenceField field{o1.batch(), o1.height(), o1.width(), std::vector<double>(g.batch * g.pixels)};
    kernels::js_field(g, o1.values().data(), o2.values().data(), field.values);
    return field;
}

ConsistencyMask make_masks(const DivergenceField& js, double kappa) {
    check_kappa(kappa);
    ConsistencyMask mask{js.batch, js.height, js.width, kappa, {}, {}};
    mask.cons.resize(js.values.size());
    mask.diff.resize(js.values.size());
    for (std::size_t i = 0; i < js.values.size(); ++i) {
        mask.cons[i] = js.values[i] < kappa ? 1 : 0;
        mask.diff[i] = js.values[i] >= kappa ? 1 : 0;
    }
    return mask;
}

LabelMap clg(const ProbMap& o1, const ProbMap& o2, double kappa) {
    check_kappa(kappa);
    const auto g = geometry_of(o1, o2);
    LabelMap out(o1.batch(), o1.height(), o1.width());
    kernels::consensus_labels(g, o1.values().data(), o2.values().data(), kappa, out.labels);
    return out;
}

LabelMap argmax_of_mean(const ProbMap& o1, const ProbMap& o2) {
    // js <= 1 < 2 everywhere, so an above-range threshold disables the mask.
    const auto g = geometry_of(o1, o2);
    LabelMap out(o1.batch(), o1.height(), o1.width());
    kernels::consensus_labels(g, o1.values().data(), o2.values().data(), 2.0, out.labels);
    return out;
}

LabelMap argmax(const ProbMap& p) {
    const std::size_t k = p.classes();
    const std::size_t plane = p.height() * p.width();
    const auto v = p.values().data();
    LabelMap out(p.batch(), p.height(), p.width());
    for (std::size_t b = 0; b < p.batch(); ++b)
        for (std::size_t px = 0; px < plane; ++px) {
            std::int32_t best = 0;
            for (std::size_t c = 1; c < k; ++c) {
                if (v[(b * k + c) * plane + px] > v[(b * k + static_cast<std::size_t>(best)) * plane + px]) {
                    best = static_cast<std::int32_t>(c);
                }
            }
            out.labels[b * plane + px] = best;
        }
    return out;
}

LabelMap clg_three_way(const ProbMap& a, const ProbMap& b, const ProbMap& c, double kappa) {
    check_kappa(kappa);
    geometry_of(a, b);
    geometry_of(a, c);
    const DivergenceField ab = js_divergence(a, b);
    const DivergenceField ac = js_divergence(a, c);
    const DivergenceField bc = js_divergence(b, c);
    const std::size_t k = a.classes();
    const std::size_t plane = a.height() * a.width();
    const auto va = a.values().data();
    const auto vb = b.values().data();
    const auto vc = c.values().data();
    LabelMap out(a.batch(), a.height(), a.width());
    for (std::size_t n = 0; n < a.batch(); ++n)
        for (std::size_t px = 0; px < plane; ++px) {
            const std::size_t i = n * plane + px;
            if (!(ab.values[i] < kappa && ac.values[i] < kappa && bc.values[i] < kappa)) continue;
            double best = -1.0;
            std::int32_t label = 0;
            for (std::size_t cls = 0; cls < k; ++cls) {
                const std::size_t j = (n * k + cls) * plane + px;
                const double m = (va[j] + vb[j] + vc[j]) / 3.0;
                if (m > best) {
                    best = m;
                    label = static_cast<std::int32_t>(cls);
                }
            }
            out.labels[i] = label;
        }
    return out;
}

LabelMap clg_strategy(ClgStrategy strategy, const GroupOutputs& o, int target_group, double kappa) {
    if (target_group != 0 && target_group != 1) throw std::invalid_argument("clg_strategy: target_group must be 0 or 1");
    const bool g0 = target_group == 0;
    const ProbMap& own_teacher = g0 ? o.teacher0 : o.teacher1;
    const ProbMap& other_student = g0 ? o.student1 : o.student0;
    const ProbMap& other_teacher = g0 ? o.teacher1 : o.teacher0;
    switch (strategy) {
        case ClgStrategy::Default:
            return clg(other_student, own_teacher, kappa);
        case ClgStrategy::Strategy1:
            return clg(other_teacher, other_student, kappa);
        case ClgStrategy::Strategy2:
            return clg(own_teacher, other_teacher, kappa);
        case ClgStrategy::Strategy3:
            return clg_three_way(own_teacher, other_teacher, other_student, kappa);
    }
    throw std::invalid_argument("clg_strategy: unknown strategy");
}

}  // namespace dtsl

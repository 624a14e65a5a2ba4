#include "dtsl/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtsl/csv.hpp"
#include "dtsl/kernels.hpp"
#include "dtsl/ops.hpp"

namespace dtsl {

namespace {

void check_labels(const Shape& s, const LabelMap& labels, const char* op) {
    if (s.size() != 4 || labels.batch != s[0] || labels.height != s[2] || labels.width != s[3]) {
        throw std::invalid_argument(std::string(op) + ": label map does not match prediction shape " +
                                    shape_to_string(s));
    }
    const auto k = static_cast<std::int32_t>(s[1]);
    for (std::int32_t v : labels.labels) {
        if (v < 0 || v >= k) {
            throw std::invalid_argument(std::string(op) + ": label " + std::to_string(v) + " outside [0," +
                                        std::to_string(k) + ")");
        }
    }
}

Tensor one_hot(const LabelMap& labels, std::size_t classes) {
    const std::size_t plane = labels.height * labels.width;
    std::vector<double> v(labels.batch * classes * plane, 0.0);
    for (std::size_t b = 0; b < labels.batch; ++b)
        for (std::size_t px = 0; px < plane; ++px) {
            const auto c = static_cast<std::size_t>(labels.labels[b * plane + px]);
            v[(b * classes + c) * plane + px] = 1.0;
        }
    return Tensor({labels.batch, classes, labels.height, labels.width}, std::move(v));
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const LabelMap& labels) {
    check_labels(logits.shape(), labels, "cross_entropy");
    const Tensor picked = sum(mul(log_softmax(logits, 1), one_hot(labels, logits.size(1))));
    return mul(picked, -1.0 / static_cast<double>(labels.labels.size()));
}

Tensor dice_loss(const ProbMap& probs, const LabelMap& labels) {
    const Tensor& p = probs.values();
    check_labels(p.shape(), labels, "dice_loss");
    const Tensor y = one_hot(labels, probs.classes());
    const Tensor intersection = sum_except_axis(mul(p, y), 1);
    const Tensor denominator = add(add(sum_except_axis(p, 1), sum_except_axis(y, 1)), kDiceSmoothing);
    const Tensor dice = div(add(mul(intersection, 2.0), kDiceSmoothing), denominator);
    return rsub(1.0, mean(dice));
}

Tensor l_sup(const Tensor& logits, const LabelMap& ground_truth) {
    return mul(add(cross_entropy(logits, ground_truth), dice_loss(ProbMap::from_logits(logits), ground_truth)), 0.5);
}

Tensor l_semi(const ProbMap& student_probs, const LabelMap& pseudo_labels) {
    return dice_loss(student_probs, pseudo_labels);
}

Tensor l_url(const ProbMap& student_probs, const ProbMap& cross_teacher_probs, double kappa,
             std::size_t num_classes) {
    if (num_classes != student_probs.classes()) {
        throw std::invalid_argument("l_url: num_classes does not match the prediction");
    }
    const ConsistencyMask mask = make_masks(js_divergence(student_probs.detached(), cross_teacher_probs.detached()), kappa);
    std::size_t count = 0;
    for (auto d : mask.diff) count += d;
    if (count == 0) return Tensor::scalar(0.0);

    const Tensor& p = student_probs.values();
    // KL(p || u) = sum_k p_k log2 p_k + log2 K
    const Tensor neg_entropy_bits =
        mul(sum_axis(mul(p, log(clamp_min(p, kernels::kLogEpsilon))), 1), 1.0 / std::numbers::ln2);
    const Tensor kl = add(neg_entropy_bits, std::log2(static_cast<double>(num_classes)));
    std::vector<double> weights(mask.diff.begin(), mask.diff.end());
    const Tensor m({mask.batch, mask.height, mask.width}, std::move(weights));
    return mul(sum(mul(kl, m)), 1.0 / static_cast<double>(count));
}

Tensor l_pace(const Tensor& semi0, const Tensor& semi1, const Tensor& url0, const Tensor& url1, double alpha,
              double beta) {
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("l_pace: alpha and beta must be non-negative");
    return add(mul(add(semi0, semi1), alpha), mul(add(url0, url1), beta));
}

double l_pace(double semi0, double semi1, double url0, double url1, double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("l_pace: alpha and beta must be non-negative");
    return alpha * (semi0 + semi1) + beta * (url0 + url1);
}

std::string loss_csv_header() { return "iter,sup,semi,url,pace,total_l,total_u,cons_fraction"; }

std::string loss_csv_row(const LossBreakdown& b) {
    return csv::join({std::to_string(b.iteration), csv::fmt(b.sup), csv::fmt(b.semi), csv::fmt(b.url),
                      csv::fmt(b.pace), csv::fmt(b.total_labeled), csv::fmt(b.total_unlabeled),
                      csv::fmt(b.cons_fraction)});
}

double pixel_cross_entropy(std::span<const double> distribution, std::int32_t target) {
    return -std::log(std::max(distribution[static_cast<std::size_t>(target)], kernels::kLogEpsilon));
}

DecompositionSides mt_decomposition_check(const ProbMap& prediction, const LabelMap& ground_truth,
                                          const LabelMap& teacher_labels, double lambda, const PixelLoss& loss) {
    check_labels(prediction.values().shape(), ground_truth, "mt_decomposition_check");
    check_labels(prediction.values().shape(), teacher_labels, "mt_decomposition_check");
    const std::size_t k = prediction.classes();
    const std::size_t plane = prediction.height() * prediction.width();
    const auto v = prediction.values().data();
    std::vector<double> dist(k);
    DecompositionSides sides;
    for (std::size_t b = 0; b < prediction.batch(); ++b)
        for (std::size_t px = 0; px < plane; ++px) {
            for (std::size_t c = 0; c < k; ++c) dist[c] = v[(b * k + c) * plane + px];
            const std::int32_t y = ground_truth.labels[b * plane + px];
            const std::int32_t t = teacher_labels.labels[b * plane + px];
            const double l_gt = loss(dist, y);
            const double l_t = loss(dist, t);
            sides.lhs += l_gt + lambda * l_t;
            sides.rhs += (t == y) ? (1.0 + lambda) * l_gt : l_gt + lambda * l_t;
        }
    return sides;
}

}  // namespace dtsl

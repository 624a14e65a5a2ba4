#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dtsl/divergence.hpp"
#include "dtsl/label_map.hpp"
#include "dtsl/tensor.hpp"

namespace dtsl {

inline constexpr double kDiceSmoothing = 1e-5;

// Mean over pixels of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, const LabelMap& labels);

// 1 - mean_k (2 sum p_k y_k + eps) / (sum p_k + sum y_k + eps), sums over
// batch and space, classes macro-averaged including background.
Tensor dice_loss(const ProbMap& probs, const LabelMap& labels);

// (cross_entropy + dice_loss(softmax)) / 2 for one student's logits.
Tensor l_sup(const Tensor& logits, const LabelMap& ground_truth);

// Dice loss against CLG pseudo-labels; the labels carry no gradient.
Tensor l_semi(const ProbMap& student_probs, const LabelMap& pseudo_labels);

// Uniform regularization: mean over pixels where js(student, cross teacher)
// >= kappa of KL(student || Uniform(K)) in bits. The mask is computed on
// detached values; zero when the mask is empty.
Tensor l_url(const ProbMap& student_probs, const ProbMap& cross_teacher_probs, double kappa, std::size_t num_classes);

// alpha (semi0 + semi1) + beta (url0 + url1).
Tensor l_pace(const Tensor& semi0, const Tensor& semi1, const Tensor& url0, const Tensor& url1, double alpha,
              double beta);
double l_pace(double semi0, double semi1, double url0, double url1, double alpha, double beta);

// Per-iteration loss summary summed over both groups. The semi/url entries
// already include labeled and unlabeled batches; total_labeled and
// total_unlabeled split the objective by batch.
struct LossBreakdown {
    std::size_t iteration = 0;
    double sup = 0.0;
    double semi = 0.0;
    double url = 0.0;
    double pace = 0.0;
    double total_labeled = 0.0;
    double total_unlabeled = 0.0;
    double cons_fraction = 0.0;
    double sup_group[2] = {0.0, 0.0};
    double semi_group[2] = {0.0, 0.0};
    double url_group[2] = {0.0, 0.0};
};

std::string loss_csv_header();
std::string loss_csv_row(const LossBreakdown& b);

// Per-pixel loss used by the mean-teacher decomposition: distribution at one
// pixel and a hard target class.
using PixelLoss = std::function<double(std::span<const double> distribution, std::int32_t target)>;

double pixel_cross_entropy(std::span<const double> distribution, std::int32_t target);

struct DecompositionSides {
    double lhs = 0.0;
    double rhs = 0.0;
};

// lhs: sum over pixels of L(p, y) + lambda L(p, t).
// rhs: (1 + lambda) L(p, y) where t == y, L(p, y) + lambda L(p, t) elsewhere.
DecompositionSides mt_decomposition_check(const ProbMap& prediction, const LabelMap& ground_truth,
                                          const LabelMap& teacher_labels, double lambda, const PixelLoss& loss);

}  // namespace dtsl

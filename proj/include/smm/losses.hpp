#pragma once

#include "smm/ad.hpp"
#include "smm/common.hpp"

#include <vector>

namespace smm::losses {

// Batch of predictions and sentinel-masked labels for the three tasks.
// -1 marks a missing categorical label, -5.0 a missing VA pair.
struct LossBatch {
    Mat au_logits;             // (N, H)
    Eigen::MatrixXi au_labels; // (N, H), {0, 1, -1}
    Mat expr_logits;           // (N, C)
    Eigen::VectorXi expr_labels; // (N), {-1, 0..7}
    Mat va_pred;               // (N, 2)
    Mat va_labels;             // (N, 2)
    Vec au_weights;            // P^AU, size H
    Vec expr_weights;          // P^EXPR, size C
};

struct LossTerm {
    ad::Var value;
    long unmasked = 0; // contributing (sample, label) pairs; 0 means skipped
};

// Weighted masked BCE, normalized by the count of unmasked (sample, AU)
// pairs. The balancing weight multiplies the positive term only.
LossTerm au_loss_graph(ad::Tape& tape, ad::Var au_logits,
                       const Eigen::MatrixXi& labels, const Vec& weights);

// Re-weighted softmax cross entropy over unmasked samples.
LossTerm expr_loss_graph(ad::Tape& tape, ad::Var expr_logits,
                         const Eigen::VectorXi& labels, const Vec& weights);

// Concordance correlation of an (n,1) prediction column against constant
// targets, population moments.
ad::Var ccc_graph(ad::Tape& tape, ad::Var pred, const Vec& target);

// 1 - CCC^V + 1 - CCC^A over unmasked rows; skipped (0) below 2 samples.
LossTerm va_loss_graph(ad::Tape& tape, ad::Var va_pred, const Mat& va_labels);

struct TotalLoss {
    ad::Var value;
    LossTerm au, expr, va;
};

TotalLoss total_loss_graph(ad::Tape& tape, ad::Var au_logits, ad::Var expr_logits,
                           ad::Var va_pred, const LossBatch& batch);

// ---- scalar API ----
double au_loss(const LossBatch& batch);
double expr_loss(const LossBatch& batch);
double va_loss(const LossBatch& batch);
double total_loss(const LossBatch& batch);

// 2 cov / (var_p + var_t + (mean_p - mean_t)^2); 1.0 when both sequences
// are constant and equal. Shared with evaluation-time metrics.
double ccc(const std::vector<double>& pred, const std::vector<double>& target);

} // namespace smm::losses

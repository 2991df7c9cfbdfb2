#pragma once

#include "smm/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace smm::metrics {

struct F1Result {
    double value = 0;
    bool degenerate = false; // no positives anywhere (F1 defined as 0)
};

// Standard 2TP / (2TP + FP + FN) on {0,1} sequences.
F1Result f1_binary(const std::vector<int>& pred, const std::vector<int>& target);

struct AuF1 {
    Vec per_au;
    double mean = 0;
};

// Per-AU F1 over unmasked entries (label -1 masked), thresholded
// probabilities, unweighted mean over the H units.
AuF1 f1_au(const Mat& probs, const Eigen::MatrixXi& targets, double threshold = 0.5);

struct MacroF1 {
    double value = 0;
    Vec per_class;
    std::vector<int> absent_classes; // contributed F1 = 0
};

// argmax over logits, one-vs-rest F1 per class, unweighted mean over C.
MacroF1 macro_f1_expr(const Mat& logits, const Eigen::VectorXi& targets,
                      int num_classes = 8);

// P = 1/2 (CCC^V + CCC^A) + 1/8 sum F1^EXPR + 1/12 sum F1^AU
double mtl_score(double ccc_v, double ccc_a, const Vec& expr_f1s, const Vec& au_f1s);

// Per-split evaluation summary; absent tasks leave fields unset and the
// composite marked partial.
struct Report {
    std::optional<double> f1_au_mean;
    Vec f1_au_per_unit;
    std::optional<double> macro_f1_expr;
    Vec f1_expr_per_class;
    std::optional<double> ccc_valence;
    std::optional<double> ccc_arousal;
    std::optional<double> ccc_va_mean;
    double composite = 0;
    bool partial = false;

    std::string to_json() const;
};

void write_report(const Report& r, const std::string& path);

} // namespace smm::metrics

#include "smm/metrics.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using nlohmann::json;

namespace smm::metrics {

F1Result f1_binary(const std::vector<int>& pred, const std::vector<int>& target) {
    if (pred.empty() || pred.size() != target.size())
        throw Error("f1_binary: empty or mismatched inputs");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && target[i] == 1) ++tp;
        else if (pred[i] == 1 && target[i] == 0) ++fp;
        else if (pred[i] == 0 && target[i] == 1) ++fn;
    }
    F1Result r;
    long denom = 2 * tp + fp + fn;
    if (denom == 0) {
        r.value = 0.0;
        r.degenerate = true;
    } else {
        r.value = 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return r;
}

AuF1 f1_au(const Mat& probs, const Eigen::MatrixXi& targets, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw Error("f1_au: threshold must lie in (0,1)");
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw Error("f1_au: shape mismatch");
    AuF1 out;
    out.per_au.resize(probs.cols());
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        std::vector<int> p, t;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            if (targets(i, j) < 0) continue;
            p.push_back(probs(i, j) >= threshold ? 1 : 0);
            t.push_back(targets(i, j));
        }
        if (p.empty())
            throw Error("f1_au: AU " + std::to_string(j) + " has no unmasked entries");
        out.per_au(j) = f1_binary(p, t).value;
    }
    out.mean = out.per_au.mean();
    return out;
}

MacroF1 macro_f1_expr(const Mat& logits, const Eigen::VectorXi& targets,
                      int num_classes) {
    if (logits.rows() != targets.size())
        throw Error("macro_f1_expr: shape mismatch");
    std::vector<int> pred, truth;
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        if (targets(i) < 0) continue;
        Eigen::Index arg;
        logits.row(i).maxCoeff(&arg);
        pred.push_back(static_cast<int>(arg));
        truth.push_back(targets(i));
    }
    if (pred.empty()) throw Error("macro_f1_expr: no unmasked samples");
    MacroF1 out;
    out.per_class.resize(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int> p(pred.size()), t(truth.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i] == c ? 1 : 0;
            t[i] = truth[i] == c ? 1 : 0;
        }
        F1Result f = f1_binary(p, t);
        out.per_class(c) = f.value;
        if (f.degenerate) out.absent_classes.push_back(c);
    }
    // fixed denominator of C keeps the composite's 1/8 weighting exact
    out.value = out.per_class.mean();
    return out;
}

double mtl_score(double ccc_v, double ccc_a, const Vec& expr_f1s, const Vec& au_f1s) {
    if (expr_f1s.size() != 8 || au_f1s.size() != 12)
        throw Error("mtl_score: expects 8 expression and 12 AU F1 values");
    return 0.5 * (ccc_v + ccc_a) + expr_f1s.sum() / 8.0 + au_f1s.sum() / 12.0;
}

std::string Report::to_json() const {
    json j;
    if (f1_au_mean) {
        j["f1_au_mean"] = *f1_au_mean;
        j["f1_au_per_unit"] = std::vector<double>(
            f1_au_per_unit.data(), f1_au_per_unit.data() + f1_au_per_unit.size());
    }
    if (macro_f1_expr) {
        j["macro_f1_expr"] = *macro_f1_expr;
        j["f1_expr_per_class"] = std::vector<double>(
            f1_expr_per_class.data(),
            f1_expr_per_class.data() + f1_expr_per_class.size());
    }
    if (ccc_valence) j["ccc_valence"] = *ccc_valence;
    if (ccc_arousal) j["ccc_arousal"] = *ccc_arousal;
    if (ccc_va_mean) j["ccc_va_mean"] = *ccc_va_mean;
    j["composite"] = composite;
    j["partial"] = partial;
    return j.dump(2);
}

void write_report(const Report& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    out << r.to_json() << "\n";
}

} // namespace smm::metrics

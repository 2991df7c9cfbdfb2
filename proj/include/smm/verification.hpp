#pragma once

#include "smm/common.hpp"

#include <algorithm>
#include <functional>
#include <vector>

// Independent oracles used by the test suites. Deliberately naive, direct
// formula evaluations sharing no code with the implementations they check.
namespace smm::verify {

// Central finite differences, one coordinate at a time, 64-bit.
inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f,
                            const Vec& point, double epsilon) {
    if (epsilon <= 0.0) throw Error("finite_diff_grad: epsilon must be > 0");
    Vec g(point.size());
    Vec x = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        x(i) = point(i) + epsilon;
        double fp = f(x);
        x(i) = point(i) - epsilon;
        double fm = f(x);
        x(i) = point(i);
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw Error("finite_diff_grad: non-finite evaluation");
        g(i) = (fp - fm) / (2.0 * epsilon);
    }
    return g;
}

// Relative error with an absolute floor.
inline double rel_err(double got, double want, double floor = 1e-8) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

inline double oracle_ccc(const std::vector<double>& p, const std::vector<double>& t) {
    if (p.size() != t.size() || p.size() < 2) throw Error("oracle_ccc: bad input");
    const double n = static_cast<double>(p.size());
    double mp = 0, mt = 0;
    for (std::size_t i = 0; i < p.size(); ++i) { mp += p[i]; mt += t[i]; }
    mp /= n;
    mt /= n;
    double vp = 0, vt = 0, cov = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        vp += (p[i] - mp) * (p[i] - mp);
        vt += (t[i] - mt) * (t[i] - mt);
        cov += (p[i] - mp) * (t[i] - mt);
    }
    vp /= n;
    vt /= n;
    cov /= n;
    double denom = vp + vt + (mp - mt) * (mp - mt);
    if (denom == 0.0) return 1.0; // both constant and equal
    return 2.0 * cov / denom;
}

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion oracle_confusion(const std::vector<int>& pred,
                                  const std::vector<int>& target) {
    if (pred.size() != target.size()) throw Error("oracle_confusion: length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 1)
            (pred[i] == 1 ? c.tp : c.fn)++;
        else
            (pred[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

inline double oracle_f1(const std::vector<int>& pred, const std::vector<int>& target) {
    Confusion c = oracle_confusion(pred, target);
    long denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

// One-vs-rest macro F1 over a fixed class count.
inline double oracle_macro_f1(const std::vector<int>& pred,
                              const std::vector<int>& target, int num_classes) {
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int> p(pred.size()), t(target.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i] == c ? 1 : 0;
            t[i] = target[i] == c ? 1 : 0;
        }
        sum += oracle_f1(p, t);
    }
    return sum / static_cast<double>(num_classes);
}

} // namespace smm::verify

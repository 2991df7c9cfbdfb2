#include "smm/losses.hpp"

namespace smm::losses {

namespace {

void check_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw Error(std::string("non-finite ") + what);
}

} // namespace

LossTerm au_loss_graph(ad::Tape& tape, ad::Var au_logits,
                       const Eigen::MatrixXi& labels, const Vec& weights) {
    const Mat& z = tape.value(au_logits);
    check_finite(z, "AU logits");
    if (z.rows() != labels.rows() || z.cols() != labels.cols())
        throw Error("au_loss: logits/labels shape mismatch");
    Mat pos_coef = Mat::Zero(z.rows(), z.cols());
    Mat neg_coef = Mat::Zero(z.rows(), z.cols());
    long count = 0;
    for (Eigen::Index i = 0; i < labels.rows(); ++i) {
        for (Eigen::Index j = 0; j < labels.cols(); ++j) {
            if (labels(i, j) == 1) {
                pos_coef(i, j) = weights(j);
                ++count;
            } else if (labels(i, j) == 0) {
                neg_coef(i, j) = 1.0;
                ++count;
            }
        }
    }
    if (count == 0) return {tape.constant(Mat::Zero(1, 1)), 0};
    // -[P y log sigma(z) + (1-y) log(1-sigma(z))]
    //   = P y softplus(-z) + (1-y) softplus(z)
    ad::Var pos = tape.mul(tape.constant(pos_coef),
                           tape.softplus(tape.scale(au_logits, -1.0)));
    ad::Var neg = tape.mul(tape.constant(neg_coef), tape.softplus(au_logits));
    ad::Var total = tape.sum_all(tape.add(pos, neg));
    return {tape.scale(total, 1.0 / static_cast<double>(count)), count};
}

LossTerm expr_loss_graph(ad::Tape& tape, ad::Var expr_logits,
                         const Eigen::VectorXi& labels, const Vec& weights) {
    const Mat& z = tape.value(expr_logits);
    check_finite(z, "EXPR logits");
    if (z.rows() != labels.size())
        throw Error("expr_loss: logits/labels shape mismatch");
    Mat onehot = Mat::Zero(z.rows(), z.cols());
    Mat row_w = Mat::Zero(z.rows(), 1);
    long count = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i) >= 0) {
            onehot(i, labels(i)) = 1.0;
            row_w(i, 0) = weights(labels(i));
            ++count;
        }
    }
    if (count == 0) return {tape.constant(Mat::Zero(1, 1)), 0};
    ad::Var lse = tape.logsumexp_rows(expr_logits);                        // (n,1)
    ad::Var true_logit = tape.rowwise_sum(tape.mul(expr_logits, tape.constant(onehot)));
    ad::Var per_sample = tape.mul(tape.constant(row_w), tape.sub(lse, true_logit));
    return {tape.scale(tape.sum_all(per_sample), 1.0 / static_cast<double>(count)),
            count};
}

ad::Var ccc_graph(ad::Tape& tape, ad::Var pred, const Vec& target) {
    const Mat& p = tape.value(pred);
    if (p.cols() != 1 || p.rows() != target.size() || p.rows() < 2)
        throw Error("ccc_graph: need matching (n,1) inputs with n >= 2");
    const double n = static_cast<double>(p.rows());
    const double mt = target.mean();
    const double vt = (target.array() - mt).square().sum() / n;
    ad::Var mp = tape.scale(tape.sum_all(pred), 1.0 / n);
    ad::Var dev = tape.sub_bcast(pred, mp);
    ad::Var vp = tape.scale(tape.sum_all(tape.square(dev)), 1.0 / n);
    Mat tdev = (target.array() - mt).matrix();
    ad::Var cov =
        tape.scale(tape.sum_all(tape.mul(dev, tape.constant(tdev))), 1.0 / n);
    ad::Var mean_gap = tape.square(tape.add_scalar(mp, -mt));
    ad::Var denom = tape.add(tape.add_scalar(vp, vt), mean_gap);
    return tape.div_scalars(tape.scale(cov, 2.0), denom);
}

LossTerm va_loss_graph(ad::Tape& tape, ad::Var va_pred, const Mat& va_labels) {
    const Mat& p = tape.value(va_pred);
    check_finite(p, "VA predictions");
    if (p.rows() != va_labels.rows() || p.cols() != 2 || va_labels.cols() != 2)
        throw Error("va_loss: shape mismatch");
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < va_labels.rows(); ++i)
        if (va_labels(i, 0) != -5.0) rows.push_back(static_cast<int>(i));
    if (rows.size() < 2) return {tape.constant(Mat::Zero(1, 1)), 0};
    ad::Var sel = tape.gather_rows(va_pred, rows);
    Vec tv(rows.size()), ta(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        tv(static_cast<Eigen::Index>(i)) = va_labels(rows[i], 0);
        ta(static_cast<Eigen::Index>(i)) = va_labels(rows[i], 1);
    }
    ad::Var ccc_v = ccc_graph(tape, tape.cols(sel, 0, 1), tv);
    ad::Var ccc_a = ccc_graph(tape, tape.cols(sel, 1, 1), ta);
    ad::Var loss = tape.add_scalar(tape.scale(tape.add(ccc_v, ccc_a), -1.0), 2.0);
    return {loss, static_cast<long>(rows.size())};
}

TotalLoss total_loss_graph(ad::Tape& tape, ad::Var au_logits, ad::Var expr_logits,
                           ad::Var va_pred, const LossBatch& batch) {
    TotalLoss t;
    t.au = au_loss_graph(tape, au_logits, batch.au_labels, batch.au_weights);
    t.expr = expr_loss_graph(tape, expr_logits, batch.expr_labels, batch.expr_weights);
    t.va = va_loss_graph(tape, va_pred, batch.va_labels);
    t.value = tape.add(tape.add(t.au.value, t.expr.value), t.va.value);
    return t;
}

namespace {

template <typename F>
double eval_scalar(F&& build) {
    ad::Tape tape;
    return tape.scalar(build(tape));
}

} // namespace

double au_loss(const LossBatch& batch) {
    return eval_scalar([&](ad::Tape& t) {
        return au_loss_graph(t, t.constant(batch.au_logits), batch.au_labels,
                             batch.au_weights)
            .value;
    });
}

double expr_loss(const LossBatch& batch) {
    return eval_scalar([&](ad::Tape& t) {
        return expr_loss_graph(t, t.constant(batch.expr_logits), batch.expr_labels,
                               batch.expr_weights)
            .value;
    });
}

double va_loss(const LossBatch& batch) {
    return eval_scalar([&](ad::Tape& t) {
        return va_loss_graph(t, t.constant(batch.va_pred), batch.va_labels).value;
    });
}

double total_loss(const LossBatch& batch) {
    return au_loss(batch) + expr_loss(batch) + va_loss(batch);
}

double ccc(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.size() < 2)
        throw Error("ccc: need equal-length sequences with n >= 2");
    const double n = static_cast<double>(pred.size());
    double mp = 0, mt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) { mp += pred[i]; mt += target[i]; }
    mp /= n;
    mt /= n;
    double vp = 0, vt = 0, cov = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        vp += (pred[i] - mp) * (pred[i] - mp);
        vt += (target[i] - mt) * (target[i] - mt);
        cov += (pred[i] - mp) * (target[i] - mt);
    }
    vp /= n;
    vt /= n;
    cov /= n;
    double denom = vp + vt + (mp - mt) * (mp - mt);
    if (denom == 0.0) return 1.0; // both constant and equal
    return 2.0 * cov / denom;
}

} // namespace smm::losses

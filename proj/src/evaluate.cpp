#include "smm/evaluate.hpp"

#include "smm/losses.hpp"

#include <limits>
#include <map>

namespace smm::evaluate {

metrics::Report evaluate_predictions(const std::vector<model::PredictionBundle>& preds,
                                     const data::DatasetIndex& index, bool lenient) {
    std::map<std::pair<std::string, long>, const model::PredictionBundle*> by_key;
    for (const auto& p : preds) by_key[{p.video_id, p.frame_index}] = &p;

    std::vector<const data::FrameRecord*> au_frames, expr_frames, va_frames;
    std::vector<const model::PredictionBundle*> au_preds, expr_preds, va_preds;
    for (const auto& r : index.records) {
        auto it = by_key.find({r.video_id, r.frame_index});
        if (it == by_key.end())
            throw Error("no prediction for frame " + r.video_id + "/" +
                        std::to_string(r.frame_index));
        if (r.has_au()) { au_frames.push_back(&r); au_preds.push_back(it->second); }
        if (r.has_expr()) { expr_frames.push_back(&r); expr_preds.push_back(it->second); }
        if (r.has_va()) { va_frames.push_back(&r); va_preds.push_back(it->second); }
    }

    metrics::Report rep;

    if (!au_frames.empty()) {
        const int H = static_cast<int>(au_preds[0]->au_probs.size());
        Mat probs(au_frames.size(), H);
        Eigen::MatrixXi targets(au_frames.size(), H);
        for (std::size_t i = 0; i < au_frames.size(); ++i) {
            probs.row(static_cast<Eigen::Index>(i)) = au_preds[i]->au_probs.transpose();
            for (int j = 0; j < H; ++j)
                targets(static_cast<Eigen::Index>(i), j) =
                    j < static_cast<int>(au_frames[i]->au_labels.size())
                        ? au_frames[i]->au_labels[static_cast<std::size_t>(j)]
                        : -1;
        }
        if (lenient) {
            // average only over units that have data
            std::vector<double> vals;
            Vec per = Vec::Constant(H, std::numeric_limits<double>::quiet_NaN());
            for (int j = 0; j < H; ++j) {
                std::vector<int> p, t;
                for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                    if (targets(i, j) < 0) continue;
                    p.push_back(probs(i, j) >= 0.5 ? 1 : 0);
                    t.push_back(targets(i, j));
                }
                if (p.empty()) continue;
                per(j) = metrics::f1_binary(p, t).value;
                vals.push_back(per(j));
            }
            if (!vals.empty()) {
                rep.f1_au_per_unit = per;
                double s = 0;
                for (double v : vals) s += v;
                rep.f1_au_mean = s / static_cast<double>(vals.size());
            }
        } else {
            auto f1 = metrics::f1_au(probs, targets);
            rep.f1_au_per_unit = f1.per_au;
            rep.f1_au_mean = f1.mean;
        }
    }

    if (!expr_frames.empty()) {
        const int C = static_cast<int>(expr_preds[0]->expr_logits.size());
        Mat logits(expr_frames.size(), C);
        Eigen::VectorXi targets(expr_frames.size());
        for (std::size_t i = 0; i < expr_frames.size(); ++i) {
            logits.row(static_cast<Eigen::Index>(i)) =
                expr_preds[i]->expr_logits.transpose();
            targets(static_cast<Eigen::Index>(i)) = expr_frames[i]->expr_label;
        }
        auto mf = metrics::macro_f1_expr(logits, targets, C);
        rep.f1_expr_per_class = mf.per_class;
        rep.macro_f1_expr = mf.value;
    }

    if (va_frames.size() >= 2) {
        std::vector<double> pv, pa, tv, ta;
        for (std::size_t i = 0; i < va_frames.size(); ++i) {
            pv.push_back(va_preds[i]->valence);
            pa.push_back(va_preds[i]->arousal);
            tv.push_back(va_frames[i]->valence);
            ta.push_back(va_frames[i]->arousal);
        }
        rep.ccc_valence = losses::ccc(pv, tv);
        rep.ccc_arousal = losses::ccc(pa, ta);
        rep.ccc_va_mean = 0.5 * (*rep.ccc_valence + *rep.ccc_arousal);
    }

    rep.partial = !(rep.f1_au_mean && rep.macro_f1_expr && rep.ccc_valence);
    double composite = 0;
    if (rep.ccc_valence) composite += 0.5 * (*rep.ccc_valence + *rep.ccc_arousal);
    if (rep.macro_f1_expr) composite += rep.f1_expr_per_class.sum() /
                                        static_cast<double>(rep.f1_expr_per_class.size());
    if (rep.f1_au_mean) composite += *rep.f1_au_mean;
    rep.composite = composite;
    return rep;
}

} // namespace smm::evaluate

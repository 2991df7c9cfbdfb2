#include "smm/temporal.hpp"

#include "smm/evaluate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>

using nlohmann::json;

namespace smm::temporal {

Mat smooth_sequence(const Mat& features, double mu) {
    if (mu < 0.0) throw Error("smooth_sequence: mu must be non-negative");
    if (features.rows() < 1) throw Error("smooth_sequence: empty sequence");
    Mat out(features.rows(), features.cols());
    out.row(0) = features.row(0);
    const double inv = 1.0 / (1.0 + mu);
    for (Eigen::Index t = 1; t < features.rows(); ++t)
        out.row(t) = inv * (features.row(t) + mu * out.row(t - 1));
    return out;
}

std::vector<VideoTrace> trace_dataset(const model::Model& model,
                                      const data::DatasetIndex& index) {
    const int H = model.config().sign.num_au;
    const int D = model.config().backbone.embed_dim;
    std::vector<VideoTrace> traces;
    for (const auto& [vid, range] : index.videos) {
        VideoTrace tr;
        tr.video_id = vid;
        tr.num_au = H;
        tr.dim = D;
        const Eigen::Index T = static_cast<Eigen::Index>(range.end - range.begin);
        tr.signs.resize(T, H * D);
        tr.consensus.resize(T, D);
        tr.au_labels.resize(T, H);
        tr.expr_labels.resize(T);
        tr.va_labels.resize(T, 2);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            const data::FrameRecord& r = index.records[i];
            const Eigen::Index t = static_cast<Eigen::Index>(i - range.begin);
            tr.frame_indices.push_back(r.frame_index);
            auto f = model.trace_features(r);
            for (int h = 0; h < H; ++h)
                tr.signs.block(t, h * D, 1, D) = f.signs.row(h);
            tr.consensus.row(t) = f.consensus.transpose();
            for (int h = 0; h < H; ++h)
                tr.au_labels(t, h) =
                    h < static_cast<int>(r.au_labels.size()) ? r.au_labels[h] : -1;
            tr.expr_labels(t) = r.expr_label;
            tr.va_labels(t, 0) = r.valence;
            tr.va_labels(t, 1) = r.arousal;
        }
        traces.push_back(std::move(tr));
    }
    return traces;
}

std::vector<model::PredictionBundle> decode_trace(const VideoTrace& trace,
                                                  const Decoder& decoder,
                                                  double mu_au, double mu_msg) {
    Mat signs = smooth_sequence(trace.signs, mu_au);
    Mat cons = smooth_sequence(trace.consensus, mu_msg);
    std::vector<model::PredictionBundle> out;
    for (Eigen::Index t = 0; t < signs.rows(); ++t) {
        Mat s(trace.num_au, trace.dim);
        for (int h = 0; h < trace.num_au; ++h)
            s.row(h) = signs.block(t, h * trace.dim, 1, trace.dim);
        model::PredictionBundle p = decoder(s, cons.row(t).transpose());
        p.video_id = trace.video_id;
        p.frame_index = trace.frame_indices[static_cast<std::size_t>(t)];
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<model::PredictionBundle> apply_smoothed_heads(
    const model::Model& model, const data::DatasetIndex& index,
    const SmoothingConfig& config) {
    auto traces = trace_dataset(model, index);
    Decoder decoder = [&model](const Mat& s, const Vec& c) {
        return model.decode_features(s, c);
    };
    std::vector<model::PredictionBundle> all;
    for (const auto& tr : traces) {
        auto preds = decode_trace(tr, decoder, config.mu_au, config.mu_msg);
        all.insert(all.end(), preds.begin(), preds.end());
    }
    return all;
}

namespace {

// Label-only copy of the fold's records, for metric joins.
data::DatasetIndex fold_index(const data::DatasetIndex& index,
                              const std::set<std::string>& videos) {
    std::vector<data::FrameRecord> records;
    for (const auto& r : index.records) {
        if (!videos.count(r.video_id)) continue;
        data::FrameRecord copy;
        copy.video_id = r.video_id;
        copy.frame_index = r.frame_index;
        copy.au_labels = r.au_labels;
        copy.expr_label = r.expr_label;
        copy.valence = r.valence;
        copy.arousal = r.arousal;
        records.push_back(std::move(copy));
    }
    return data::build_index(std::move(records));
}

double nan_mean(const std::vector<double>& v) {
    double s = 0;
    int n = 0;
    for (double x : v)
        if (!std::isnan(x)) { s += x; ++n; }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / n;
}

} // namespace

GridSearchResult grid_search_mu(const std::vector<VideoTrace>& traces,
                                const Decoder& decoder,
                                const data::DatasetIndex& index,
                                const std::vector<double>& grid, int folds,
                                std::uint64_t seed) {
    if (grid.empty()) throw Error("grid_search_mu: empty grid");
    if (folds < 1) throw Error("grid_search_mu: folds must be >= 1");

    // videos per labeled task subset
    int au_videos = 0, expr_videos = 0, va_videos = 0;
    for (const auto& tr : traces) {
        if ((tr.au_labels.array() >= 0).any()) ++au_videos;
        if ((tr.expr_labels.array() >= 0).any()) ++expr_videos;
        if ((tr.va_labels.col(0).array() != -5.0).any()) ++va_videos;
    }
    auto check = [&](int n, const char* task) {
        if (n > 0 && n < folds)
            throw Error(std::string("grid_search_mu: fewer than ") +
                        std::to_string(folds) + " videos with " + task + " labels");
    };
    check(au_videos, "AU");
    check(expr_videos, "EXPR");
    check(va_videos, "VA");

    std::vector<int> fold_of(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i)
        fold_of[i] = static_cast<int>(fnv1a(traces[i].video_id, 0xcbf29ce484222325ULL ^ seed) %
                                      static_cast<std::uint64_t>(folds));

    GridSearchResult result;
    std::vector<std::vector<double>> f1_au_by_mu(grid.size());
    std::vector<std::vector<double>> msg_by_mu(grid.size());

    for (int f = 0; f < folds; ++f) {
        std::set<std::string> fold_videos;
        for (std::size_t i = 0; i < traces.size(); ++i)
            if (fold_of[i] == f) fold_videos.insert(traces[i].video_id);
        if (fold_videos.empty()) continue;
        data::DatasetIndex sub = fold_index(index, fold_videos);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double mu = grid[g];
            std::vector<model::PredictionBundle> preds;
            for (std::size_t i = 0; i < traces.size(); ++i) {
                if (fold_of[i] != f) continue;
                auto p = decode_trace(traces[i], decoder, mu, mu);
                preds.insert(preds.end(), p.begin(), p.end());
            }
            auto rep = evaluate::evaluate_predictions(preds, sub, /*lenient=*/true);
            FoldEntry e;
            e.fold = f;
            e.mu = mu;
            if (rep.f1_au_mean) e.f1_au = *rep.f1_au_mean;
            if (rep.macro_f1_expr) e.macro_f1 = *rep.macro_f1_expr;
            if (rep.ccc_va_mean) e.ccc_va = *rep.ccc_va_mean;
            result.report.push_back(e);
            f1_au_by_mu[g].push_back(e.f1_au);
            double msg = std::isnan(e.macro_f1) ? e.ccc_va
                         : std::isnan(e.ccc_va) ? e.macro_f1
                                                : 0.5 * (e.macro_f1 + e.ccc_va);
            msg_by_mu[g].push_back(msg);
        }
    }

    auto pick = [&](const std::vector<std::vector<double>>& by_mu) {
        double best_mu = grid[0];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double m = nan_mean(by_mu[g]);
            if (!std::isnan(m) && m > best + 1e-12) {
                best = m;
                best_mu = grid[g];
            }
        }
        return best_mu;
    };
    result.mu_au = au_videos > 0 ? pick(f1_au_by_mu) : grid[0];
    result.mu_msg = (expr_videos > 0 || va_videos > 0) ? pick(msg_by_mu) : grid[0];
    return result;
}

std::string GridSearchResult::report_json() const {
    json j;
    j["mu_au"] = mu_au;
    j["mu_msg"] = mu_msg;
    json rows = json::array();
    for (const auto& e : report) {
        json row{{"fold", e.fold}, {"mu", e.mu}};
        if (!std::isnan(e.f1_au)) row["f1_au"] = e.f1_au;
        if (!std::isnan(e.macro_f1)) row["macro_f1_expr"] = e.macro_f1;
        if (!std::isnan(e.ccc_va)) row["ccc_va_mean"] = e.ccc_va;
        rows.push_back(std::move(row));
    }
    j["folds"] = std::move(rows);
    return j.dump(2);
}

void write_fold_report(const GridSearchResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write fold report: " + path);
    out << result.report_json() << "\n";
}

} // namespace smm::temporal

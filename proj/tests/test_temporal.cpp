#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smm/temporal.hpp"

using namespace smm;
using namespace smm::temporal;

namespace {

Mat random_features(int t, int d, std::uint64_t seed) {
    Rng rng(seed);
    Mat m(t, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < t; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
    return m;
}

// A linear decoder over synthetic traces: AU probability is a sigmoid of
// the matching sign row mean, EXPR logits and VA read the consensus.
model::PredictionBundle linear_decode(const Mat& signs, const Vec& consensus) {
    model::PredictionBundle p;
    const int H = static_cast<int>(signs.rows());
    p.au_probs.resize(H);
    for (int h = 0; h < H; ++h)
        p.au_probs(h) = 1.0 / (1.0 + std::exp(-4.0 * signs.row(h).mean()));
    p.expr_logits = consensus.head(std::min<Eigen::Index>(8, consensus.size()));
    if (p.expr_logits.size() < 8) {
        Vec padded = Vec::Zero(8);
        padded.head(p.expr_logits.size()) = p.expr_logits;
        p.expr_logits = padded;
    }
    p.valence = std::tanh(consensus(0));
    p.arousal = std::tanh(consensus(consensus.size() - 1));
    return p;
}

// Builds a labeled trace whose AU targets follow the sign of a planted
// signal; optional noise perturbs the features frame by frame. When
// static_labels is set the target is constant per video, so smoothing can
// only denoise and never lags a label change.
void add_au_trace(std::vector<VideoTrace>& traces,
                  std::vector<data::FrameRecord>& records, const std::string& vid,
                  int T, int H, int D, double noise, std::uint64_t seed,
                  bool static_labels = false) {
    Rng rng(seed);
    VideoTrace tr;
    tr.video_id = vid;
    tr.num_au = H;
    tr.dim = D;
    tr.signs.resize(T, H * D);
    tr.consensus = Mat::Zero(T, D);
    tr.au_labels.resize(T, H);
    tr.expr_labels = Eigen::VectorXi::Constant(T, -1);
    tr.va_labels = Mat::Constant(T, 2, data::kVaMissing);
    for (int t = 0; t < T; ++t) {
        tr.frame_indices.push_back(t);
        data::FrameRecord rec;
        rec.video_id = vid;
        rec.frame_index = t;
        rec.au_labels.assign(static_cast<std::size_t>(H), 0);
        for (int h = 0; h < H; ++h) {
            int phase = static_labels ? static_cast<int>(seed % 2) : t / 4;
            int label = ((h + phase) % 2 == 0) ? 1 : 0;
            double base = label == 1 ? 0.8 : -0.8;
            for (int d = 0; d < D; ++d)
                tr.signs(t, h * D + d) = base + noise * rng.normal();
            tr.au_labels(t, h) = label;
            rec.au_labels[static_cast<std::size_t>(h)] = label;
        }
        records.push_back(rec);
    }
    traces.push_back(std::move(tr));
}

} // namespace

TEST_CASE("smooth_sequence basics") {
    SUBCASE("mu = 0 is the identity") {
        Mat x = random_features(6, 3, 1);
        CHECK((smooth_sequence(x, 0.0) - x).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("negative mu is rejected") {
        CHECK_THROWS_AS(smooth_sequence(Mat::Zero(2, 2), -1.0), Error);
    }
    SUBCASE("first frame is untouched for any mu") {
        Mat x = random_features(5, 2, 2);
        for (double mu : {0.5, 3.0, 10.0})
            CHECK((smooth_sequence(x, mu).row(0) - x.row(0)).cwiseAbs().maxCoeff() ==
                  0.0);
    }
    SUBCASE("a constant sequence is a fixed point") {
        Mat x = Mat::Constant(7, 4, 0.42);
        CHECK((smooth_sequence(x, 5.0) - x).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("step sequence follows the recurrence by hand") {
        Mat x(3, 1);
        x << 0.0, 1.0, 1.0;
        double mu = 1.0;
        Mat y = smooth_sequence(x, mu);
        CHECK(y(0, 0) == 0.0);
        CHECK(y(1, 0) == doctest::Approx(0.5));   // (1 + 1*0) / 2
        CHECK(y(2, 0) == doctest::Approx(0.75));  // (1 + 1*0.5) / 2
    }
    SUBCASE("output stays inside the running convex hull") {
        Mat x = random_features(20, 3, 3);
        Mat y = smooth_sequence(x, 2.5);
        for (int j = 0; j < 3; ++j) {
            double lo = x(0, j), hi = x(0, j);
            for (int t = 0; t < 20; ++t) {
                lo = std::min(lo, x(t, j));
                hi = std::max(hi, x(t, j));
                CHECK(y(t, j) >= lo - 1e-12);
                CHECK(y(t, j) <= hi + 1e-12);
            }
        }
    }
    SUBCASE("huge mu freezes the sequence at the first frame") {
        Mat x = random_features(8, 2, 4);
        Mat y = smooth_sequence(x, 1e6);
        for (int t = 0; t < 8; ++t)
            CHECK((y.row(t) - x.row(0)).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("the recurrence is linear in the features") {
        Mat a = random_features(10, 2, 5);
        Mat b = random_features(10, 2, 6);
        Mat lhs = smooth_sequence(2.0 * a + 3.0 * b, 1.7);
        Mat rhs = 2.0 * smooth_sequence(a, 1.7) + 3.0 * smooth_sequence(b, 1.7);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("decode_trace with mu = 0 reproduces static decoding") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    add_au_trace(traces, records, "v0", 12, 3, 4, 0.3, 7);

    auto preds = decode_trace(traces[0], linear_decode, 0.0, 0.0);
    REQUIRE(preds.size() == 12);
    for (int t = 0; t < 12; ++t) {
        Mat signs(3, 4);
        for (int h = 0; h < 3; ++h) signs.row(h) = traces[0].signs.row(t).segment(h * 4, 4);
        auto direct = linear_decode(signs, traces[0].consensus.row(t).transpose());
        CHECK((preds[static_cast<std::size_t>(t)].au_probs - direct.au_probs)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK(preds[static_cast<std::size_t>(t)].video_id == "v0");
        CHECK(preds[static_cast<std::size_t>(t)].frame_index == t);
    }
}

TEST_CASE("grid search: noise-free traces select mu = 0") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    for (int v = 0; v < 6; ++v)
        add_au_trace(traces, records, "clean" + std::to_string(v), 16, 3, 4, 0.0,
                     100 + static_cast<std::uint64_t>(v));
    auto index = data::build_index(records);

    auto result = grid_search_mu(traces, linear_decode, index, {0, 1, 2, 3, 4}, 3, 9);
    CHECK(result.mu_au == 0.0);
    CHECK(!result.report.empty());
}

TEST_CASE("grid search: heavy frame noise prefers mu > 0") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    for (int v = 0; v < 6; ++v)
        add_au_trace(traces, records, "noisy" + std::to_string(v), 32, 3, 4, 2.5,
                     200 + static_cast<std::uint64_t>(v), true);
    auto index = data::build_index(records);

    auto result =
        grid_search_mu(traces, linear_decode, index, {0, 1, 2, 3, 4, 5, 6, 7}, 3, 9);
    CHECK(result.mu_au > 0.0);
}

TEST_CASE("grid search: singleton grid returns that mu") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    for (int v = 0; v < 3; ++v)
        add_au_trace(traces, records, "s" + std::to_string(v), 8, 2, 4, 0.5,
                     300 + static_cast<std::uint64_t>(v));
    auto index = data::build_index(records);
    auto result = grid_search_mu(traces, linear_decode, index, {4.0}, 3, 1);
    CHECK(result.mu_au == 4.0);
    CHECK(result.mu_msg == 4.0);
}

TEST_CASE("grid search: too few videos for the fold count is an error") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    add_au_trace(traces, records, "only", 8, 2, 4, 0.5, 400);
    auto index = data::build_index(records);
    CHECK_THROWS_AS(grid_search_mu(traces, linear_decode, index, {0.0, 1.0}, 3, 1),
                    Error);
}

TEST_CASE("grid search is deterministic for a fixed seed") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    for (int v = 0; v < 5; ++v)
        add_au_trace(traces, records, "d" + std::to_string(v), 16, 3, 4, 1.0,
                     500 + static_cast<std::uint64_t>(v));
    auto index = data::build_index(records);

    auto a = grid_search_mu(traces, linear_decode, index, {0, 2, 4}, 3, 77);
    auto b = grid_search_mu(traces, linear_decode, index, {0, 2, 4}, 3, 77);
    CHECK(a.mu_au == b.mu_au);
    CHECK(a.mu_msg == b.mu_msg);
    REQUIRE(a.report.size() == b.report.size());
    for (std::size_t i = 0; i < a.report.size(); ++i) {
        CHECK(a.report[i].fold == b.report[i].fold);
        CHECK(a.report[i].mu == b.report[i].mu);
    }
    CHECK(!a.report_json().empty());
}

TEST_CASE("fold report covers every fold and mu pair") {
    std::vector<VideoTrace> traces;
    std::vector<data::FrameRecord> records;
    for (int v = 0; v < 6; ++v)
        add_au_trace(traces, records, "r" + std::to_string(v), 8, 2, 4, 0.5,
                     600 + static_cast<std::uint64_t>(v));
    auto index = data::build_index(records);
    std::vector<double> grid = {0, 1, 2};
    auto result = grid_search_mu(traces, linear_decode, index, grid, 3, 5);
    CHECK(result.report.size() == grid.size() * 3);

    std::string path = "/tmp/smm_test_folds.json";
    write_fold_report(result, path);
    std::ifstream in(path);
    CHECK(in.good());
    std::remove(path.c_str());
}

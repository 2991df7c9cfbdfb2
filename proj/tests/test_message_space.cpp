#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smm/message_space.hpp"

using namespace smm;
using namespace smm::message;

namespace {

Vec random_vec(int n, Rng& rng) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
    return v;
}

MessageProjections random_projections(int regions, int dim, Rng& rng) {
    MessageProjections proj;
    for (int u = 0; u < regions; ++u) {
        Mat A(dim, dim);
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i < dim; ++i) A(i, j) = rng.uniform(-0.5, 0.5);
        proj.A.push_back(A);
    }
    return proj;
}

MessageHeads random_heads(int num_expr, int dim, Rng& rng) {
    MessageHeads h;
    h.expr_W.resize(num_expr, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < num_expr; ++i) h.expr_W(i, j) = rng.uniform(-1.0, 1.0);
    h.expr_b = random_vec(num_expr, rng);
    h.va_W.resize(2, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < 2; ++i) h.va_W(i, j) = rng.uniform(-1.0, 1.0);
    h.va_b = random_vec(2, rng);
    return h;
}

} // namespace

TEST_CASE("project_region: identity and hand arithmetic") {
    MessageProjections proj;
    proj.A.push_back(Mat::Identity(3, 3));
    Mat scaleproj(3, 3);
    scaleproj << 2, 0, 0, 0, 0, 1, 1, 0, 0;
    proj.A.push_back(scaleproj);

    Vec f(3);
    f << 1.0, -2.0, 0.5;
    CHECK((project_region(f, 0, proj) - f).norm() == 0.0);
    Vec m = project_region(f, 1, proj);
    CHECK(m(0) == doctest::Approx(2.0));
    CHECK(m(1) == doctest::Approx(0.5));
    CHECK(m(2) == doctest::Approx(1.0));
}

TEST_CASE("consensus is the arithmetic mean") {
    Vec a(2), b(2), c(2);
    a << 1, 4;
    b << 2, 5;
    c << 6, 0;
    Vec m = consensus({a, b, c});
    CHECK(m(0) == doctest::Approx(3.0));
    CHECK(m(1) == doctest::Approx(3.0));

    // Single message: consensus is that message.
    CHECK((consensus({a}) - a).norm() == 0.0);

    // Oracle: independent summation at tight tolerance.
    Rng rng(17);
    std::vector<Vec> msgs;
    Vec acc = Vec::Zero(5);
    for (int i = 0; i < 9; ++i) {
        msgs.push_back(random_vec(5, rng));
        acc += msgs.back();
    }
    CHECK((consensus(msgs) - acc / 9.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decode: zero consensus gives bias-only outputs") {
    Rng rng(2);
    MessageHeads heads = random_heads(8, 4, rng);
    Decoded d = decode(Vec::Zero(4), heads);
    CHECK((d.expr_logits - heads.expr_b).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(d.va_presquash(0) == doctest::Approx(heads.va_b(0)));
    CHECK(d.valence == doctest::Approx(std::tanh(heads.va_b(0))));
    CHECK(d.arousal == doctest::Approx(std::tanh(heads.va_b(1))));
}

TEST_CASE("decoded valence and arousal stay in (-1, 1)") {
    Rng rng(3);
    MessageHeads heads = random_heads(8, 6, rng);
    heads.va_b.setConstant(8.0); // drive the affine output far out
    Decoded d = decode(random_vec(6, rng), heads);
    CHECK(d.valence < 1.0);
    CHECK(d.valence > -1.0);
    CHECK(d.arousal < 1.0);
    CHECK(d.arousal > -1.0);
}

TEST_CASE("linearity equivalence holds for linear heads across random draws") {
    Rng rng(4);
    for (int trial = 0; trial < 120; ++trial) {
        int U = 2 + static_cast<int>(rng.below(6));
        int D = 2 + static_cast<int>(rng.below(5));
        MessageProjections proj = random_projections(U, D, rng);
        MessageHeads heads = random_heads(3, D, rng);
        std::vector<Vec> rois;
        for (int u = 0; u < U; ++u) rois.push_back(random_vec(D, rng));
        CHECK(verify_linearity_equivalence(rois, proj, heads, 1e-9));
    }
}

TEST_CASE("linearity equivalence fails for a quadratic decode") {
    // Construct the counterexample by hand: decoding x -> x.^2 does not
    // commute with averaging, so the two orders disagree.
    Rng rng(5);
    int U = 4, D = 3;
    MessageProjections proj = random_projections(U, D, rng);
    std::vector<Vec> rois;
    for (int u = 0; u < U; ++u) rois.push_back(random_vec(D, rng));

    std::vector<Vec> messages;
    for (int u = 0; u < U; ++u) messages.push_back(project_region(rois[u], u, proj));
    Vec mean_then_square = consensus(messages).cwiseProduct(consensus(messages));
    std::vector<Vec> squared;
    for (const Vec& m : messages) squared.push_back(m.cwiseProduct(m));
    Vec square_then_mean = consensus(squared);
    CHECK((mean_then_square - square_then_mean).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("consensus is invariant to message order") {
    Rng rng(6);
    std::vector<Vec> msgs;
    for (int i = 0; i < 7; ++i) msgs.push_back(random_vec(4, rng));
    Vec base = consensus(msgs);
    std::vector<Vec> shuffled = {msgs[3], msgs[0], msgs[6], msgs[2],
                                 msgs[5], msgs[1], msgs[4]};
    CHECK((base - consensus(shuffled)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pre-squash decode is homogeneous up to the bias") {
    Rng rng(7);
    MessageHeads heads = random_heads(5, 4, rng);
    Vec x = random_vec(4, rng);
    Decoded d1 = decode(x, heads);
    Decoded d2 = decode(2.0 * x, heads);
    Vec no_bias_1 = d1.va_presquash - heads.va_b;
    Vec no_bias_2 = d2.va_presquash - heads.va_b;
    CHECK((no_bias_2 - 2.0 * no_bias_1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tape path agrees with the plain-math path") {
    MessageConfig cfg;
    cfg.num_regions = 5;
    cfg.dim = 6;
    cfg.num_expr = 4;
    ParamStore store;
    Rng rng(8);
    init_params(cfg, store, rng);

    Rng data_rng(9);
    Mat rois(cfg.num_regions, cfg.dim);
    std::vector<Vec> roi_vecs;
    for (int u = 0; u < cfg.num_regions; ++u) {
        Vec v = random_vec(cfg.dim, data_rng);
        rois.row(u) = v.transpose();
        roi_vecs.push_back(v);
    }

    ad::Tape tape;
    ParamBinding binding(tape, store);
    ad::Var cons = consensus_from_rois(tape, cfg, binding, tape.input(rois));
    MessageOutputs out = decode_consensus(tape, cfg, binding, cons);

    MessageProjections proj = projections_from_store(cfg, store);
    MessageHeads heads = heads_from_store(store);
    std::vector<Vec> messages;
    for (int u = 0; u < cfg.num_regions; ++u)
        messages.push_back(project_region(roi_vecs[u], u, proj));
    Vec cvec = consensus(messages);
    Decoded dec = decode(cvec, heads);

    CHECK((tape.value(cons).transpose() - cvec).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tape.value(out.expr_logits).transpose() - dec.expr_logits)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(tape.value(out.va)(0, 0) == doctest::Approx(dec.valence).epsilon(1e-12));
    CHECK(tape.value(out.va)(0, 1) == doctest::Approx(dec.arousal).epsilon(1e-12));
}

TEST_CASE("initial projections are near identity") {
    MessageConfig cfg;
    cfg.num_regions = 3;
    cfg.dim = 4;
    ParamStore store;
    Rng rng(10);
    init_params(cfg, store, rng);
    MessageProjections proj = projections_from_store(cfg, store);
    for (const Mat& A : proj.A)
        CHECK((A - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.5);
}

#include "smm/message_space.hpp"

namespace smm::message {

Vec project_region(const Vec& f, int u, const MessageProjections& proj) {
    if (u < 0 || u >= static_cast<int>(proj.A.size()))
        throw Error("project_region: region index out of range");
    return proj.A[static_cast<std::size_t>(u)] * f;
}

Vec consensus(const std::vector<Vec>& messages) {
    if (messages.empty()) throw Error("consensus: empty message list");
    Vec sum = Vec::Zero(messages[0].size());
    for (const Vec& m : messages) {
        if (m.size() != sum.size()) throw Error("consensus: dimension mismatch");
        sum += m;
    }
    return sum / static_cast<double>(messages.size());
}

Decoded decode(const Vec& consensus_vec, const MessageHeads& heads) {
    Decoded d;
    d.expr_logits = heads.expr_W * consensus_vec + heads.expr_b;
    d.va_presquash = heads.va_W * consensus_vec + heads.va_b;
    d.valence = std::tanh(d.va_presquash(0));
    d.arousal = std::tanh(d.va_presquash(1));
    return d;
}

bool verify_linearity_equivalence(const std::vector<Vec>& rois,
                                  const MessageProjections& proj,
                                  const MessageHeads& heads, double tol) {
    if (rois.size() != proj.A.size())
        throw Error("verify_linearity_equivalence: region count mismatch");
    std::vector<Vec> messages;
    messages.reserve(rois.size());
    for (std::size_t u = 0; u < rois.size(); ++u)
        messages.push_back(project_region(rois[u], static_cast<int>(u), proj));

    Decoded avg_then_decode = decode(consensus(messages), heads);

    const double n = static_cast<double>(messages.size());
    Vec expr_mean = Vec::Zero(heads.expr_b.size());
    Vec va_mean = Vec::Zero(2);
    for (const Vec& m : messages) {
        expr_mean += heads.expr_W * m + heads.expr_b;
        va_mean += heads.va_W * m + heads.va_b;
    }
    expr_mean /= n;
    va_mean /= n;

    return (expr_mean - avg_then_decode.expr_logits).cwiseAbs().maxCoeff() <= tol &&
           (va_mean - avg_then_decode.va_presquash).cwiseAbs().maxCoeff() <= tol;
}

void init_params(const MessageConfig& cfg, ParamStore& store, Rng& rng) {
    const int D = cfg.dim;
    for (int u = 0; u < cfg.num_regions; ++u) {
        Mat a = Mat::Identity(D, D) + 0.05 * init_fanin(D, D, D, rng);
        store.add("msg/A" + std::to_string(u), std::move(a));
    }
    store.add("msg/expr_W", init_fanin(cfg.num_expr, D, D, rng));
    store.add("msg/expr_b", Mat::Zero(1, cfg.num_expr));
    store.add("msg/va_W", init_fanin(2, D, D, rng));
    store.add("msg/va_b", Mat::Zero(1, 2));
}

ad::Var consensus_from_rois(ad::Tape& tape, const MessageConfig& cfg,
                            const ParamBinding& params, ad::Var rois) {
    const Mat& r = tape.value(rois);
    if (r.rows() != cfg.num_regions || r.cols() != cfg.dim)
        throw Error("consensus_from_rois: ROI shape mismatch");
    std::vector<ad::Var> messages;
    for (int u = 0; u < cfg.num_regions; ++u) {
        ad::Var f = tape.rows(rois, u, 1); // (1, D)
        messages.push_back(
            tape.matmul(f, tape.transpose(params["msg/A" + std::to_string(u)])));
    }
    ad::Var stacked = tape.concat_rows(messages); // (U, D)
    Mat avg = Mat::Constant(1, cfg.num_regions, 1.0 / cfg.num_regions);
    return tape.matmul(tape.constant(avg), stacked); // (1, D)
}

MessageOutputs decode_consensus(ad::Tape& tape, const MessageConfig& cfg,
                                const ParamBinding& params, ad::Var consensus) {
    (void)cfg;
    MessageOutputs out;
    out.consensus = consensus;
    out.expr_logits = tape.add_rowvec(
        tape.matmul(consensus, tape.transpose(params["msg/expr_W"])),
        params["msg/expr_b"]);
    out.va = tape.tanh(tape.add_rowvec(
        tape.matmul(consensus, tape.transpose(params["msg/va_W"])),
        params["msg/va_b"]));
    return out;
}

MessageProjections projections_from_store(const MessageConfig& cfg,
                                          const ParamStore& store) {
    MessageProjections proj;
    for (int u = 0; u < cfg.num_regions; ++u)
        proj.A.push_back(store.at("msg/A" + std::to_string(u)));
    return proj;
}

MessageHeads heads_from_store(const ParamStore& store) {
    MessageHeads h;
    h.expr_W = store.at("msg/expr_W");
    h.expr_b = store.at("msg/expr_b").row(0).transpose();
    h.va_W = store.at("msg/va_W");
    h.va_b = store.at("msg/va_b").row(0).transpose();
    return h;
}

} // namespace smm::message

#include "smm/sign_space.hpp"

namespace smm::sign {

void SignConfig::validate(int num_regions) const {
    if (num_au <= 0 || layers < 0 || heads <= 0 || model_dim <= 0 || ff_dim <= 0)
        throw Error("sign config: dimensions must be positive");
    if (num_au > num_regions)
        throw Error("sign config: H must not exceed the number of ROI regions");
    if (model_dim % heads != 0)
        throw Error("sign config: model_dim must be divisible by heads");
    if (model_dim % 2 != 0)
        throw Error("sign config: model_dim must be even");
}

Mat positional_encoding(int num_positions, int dim) {
    if (num_positions < 1 || dim < 1) throw Error("positional_encoding: bad dims");
    if (dim % 2 != 0) throw Error("positional_encoding: dim must be even");
    Mat pe(num_positions, dim);
    for (int h = 0; h < num_positions; ++h) {
        for (int k = 0; 2 * k < dim; ++k) {
            double freq = std::pow(10000.0, -2.0 * k / dim);
            pe(h, 2 * k) = std::sin(h * freq);
            pe(h, 2 * k + 1) = std::cos(h * freq);
        }
    }
    return pe;
}

void init_params(const SignConfig& cfg, ParamStore& store, Rng& rng) {
    const int D = cfg.model_dim, F = cfg.ff_dim, H = cfg.num_au;
    for (int l = 0; l < cfg.layers; ++l) {
        std::string base = "sign/layer" + std::to_string(l) + "/";
        for (const char* w : {"Wq", "Wk", "Wv", "Wo"})
            store.add(base + w, init_fanin(D, D, D, rng));
        for (const char* b : {"bq", "bk", "bv", "bo"})
            store.add(base + b, Mat::Zero(1, D));
        store.add(base + "ln1_g", Mat::Ones(1, D));
        store.add(base + "ln1_b", Mat::Zero(1, D));
        store.add(base + "ln2_g", Mat::Ones(1, D));
        store.add(base + "ln2_b", Mat::Zero(1, D));
        store.add(base + "ff_W1", init_fanin(D, F, D, rng));
        store.add(base + "ff_b1", Mat::Zero(1, F));
        store.add(base + "ff_W2", init_fanin(F, D, F, rng));
        store.add(base + "ff_b2", Mat::Zero(1, D));
    }
    store.add("sign/head_W", init_fanin(H, cfg.model_dim, cfg.model_dim, rng));
    store.add("sign/head_b", Mat::Zero(1, H));
}

namespace {

ad::Var attention_block(ad::Tape& t, const SignConfig& cfg,
                        const ParamBinding& p, const std::string& base,
                        ad::Var x) {
    const int D = cfg.model_dim;
    const int dh = D / cfg.heads;
    ad::Var q = t.add_rowvec(t.matmul(x, p[base + "Wq"]), p[base + "bq"]);
    ad::Var k = t.add_rowvec(t.matmul(x, p[base + "Wk"]), p[base + "bk"]);
    ad::Var v = t.add_rowvec(t.matmul(x, p[base + "Wv"]), p[base + "bv"]);
    std::vector<ad::Var> head_out;
    for (int h = 0; h < cfg.heads; ++h) {
        ad::Var qh = t.cols(q, h * dh, dh);
        ad::Var kh = t.cols(k, h * dh, dh);
        ad::Var vh = t.cols(v, h * dh, dh);
        ad::Var scores =
            t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / std::sqrt(double(dh)));
        head_out.push_back(t.matmul(t.softmax_rows(scores), vh));
    }
    ad::Var merged = t.concat_cols(head_out);
    return t.add_rowvec(t.matmul(merged, p[base + "Wo"]), p[base + "bo"]);
}

} // namespace

ad::Var sign_transform(ad::Tape& tape, const SignConfig& cfg,
                       const ParamBinding& params, ad::Var rois) {
    const Mat& r = tape.value(rois);
    if (r.rows() < cfg.num_au)
        throw Error("sign_transform: fewer ROI vectors than AUs");
    if (r.cols() != cfg.model_dim)
        throw Error("sign_transform: ROI dim does not match model dim");
    ad::Var x = tape.rows(rois, 0, cfg.num_au); // first H regions
    if (cfg.use_pe) {
        ad::Var pe = tape.constant(positional_encoding(cfg.num_au, cfg.model_dim));
        x = tape.add(x, pe);
    }
    for (int l = 0; l < cfg.layers; ++l) {
        std::string base = "sign/layer" + std::to_string(l) + "/";
        ad::Var n1 = tape.add_rowvec(
            tape.mul_rowvec(tape.layernorm_rows(x), params[base + "ln1_g"]),
            params[base + "ln1_b"]);
        x = tape.add(x, attention_block(tape, cfg, params, base, n1));
        ad::Var n2 = tape.add_rowvec(
            tape.mul_rowvec(tape.layernorm_rows(x), params[base + "ln2_g"]),
            params[base + "ln2_b"]);
        ad::Var ff = tape.add_rowvec(
            tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(n2, params[base + "ff_W1"]),
                                                  params[base + "ff_b1"])),
                        params[base + "ff_W2"]),
            params[base + "ff_b2"]);
        x = tape.add(x, ff);
    }
    return x; // (H, D)
}

ad::Var au_logits(ad::Tape& tape, const SignConfig& cfg,
                  const ParamBinding& params, ad::Var signs) {
    const Mat& s = tape.value(signs);
    if (s.rows() != cfg.num_au || s.cols() != cfg.model_dim)
        throw Error("au_logits: sign feature shape mismatch");
    // Head h reads only S^(h): Hadamard with per-AU weight rows, then a
    // row sum. Not a dense layer over the concatenation.
    ad::Var per_au = tape.rowwise_sum(tape.mul(signs, params["sign/head_W"])); // (H,1)
    return tape.add_rowvec(tape.transpose(per_au), params["sign/head_b"]);    // (1,H)
}

} // namespace smm::sign

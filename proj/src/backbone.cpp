#include "smm/backbone.hpp"

namespace smm::backbone {

BackboneConfig BackboneConfig::paper_profile() {
    BackboneConfig c;
    c.profile = Profile::paper;
    c.map_height = 17;
    c.map_width = 17;
    c.map_channels = 768;
    c.num_regions = 17;
    c.embed_dim = 16;
    return c;
}

BackboneConfig BackboneConfig::toy_profile() { return BackboneConfig{}; }

void BackboneConfig::validate() const {
    if (map_height <= 0 || map_width <= 0 || map_channels <= 0 ||
        num_regions <= 0 || embed_dim <= 0)
        throw Error("backbone config: all dimensions must be positive");
    if (map_channels % 4 != 0)
        throw Error("backbone config: map_channels must be divisible by 4");
}

ConvPlan make_conv_plan(int in_h, int in_w, int in_c, int out_c) {
    ConvPlan p;
    p.in_h = in_h;
    p.in_w = in_w;
    p.in_c = in_c;
    p.out_h = in_h / 2;
    p.out_w = in_w / 2;
    p.out_c = out_c;
    p.gather.reserve(static_cast<std::size_t>(p.out_h) * p.out_w * 9);
    for (int oy = 0; oy < p.out_h; ++oy) {
        for (int ox = 0; ox < p.out_w; ++ox) {
            for (int ky = -1; ky <= 1; ++ky) {
                for (int kx = -1; kx <= 1; ++kx) {
                    int y = oy * 2 + ky + 1; // stride 2, pad 1, kernel 3
                    int x = ox * 2 + kx + 1;
                    if (y < 0 || y >= in_h || x < 0 || x >= in_w)
                        p.gather.push_back(-1);
                    else
                        p.gather.push_back(y * in_w + x);
                }
            }
        }
    }
    return p;
}

std::vector<ConvPlan> make_plans(const BackboneConfig& cfg) {
    int h = cfg.input_height(), w = cfg.input_width();
    int c = 3;
    std::vector<int> channels = {cfg.map_channels / 4, cfg.map_channels / 2,
                                 cfg.map_channels};
    std::vector<ConvPlan> plans;
    for (int out_c : channels) {
        plans.push_back(make_conv_plan(h, w, c, out_c));
        h /= 2;
        w /= 2;
        c = out_c;
    }
    return plans;
}

Mat resize_image(const data::Image& img, int out_h, int out_w) {
    Mat out(static_cast<Eigen::Index>(out_h) * out_w, img.channels);
    for (int oy = 0; oy < out_h; ++oy) {
        double sy = out_h == 1 ? 0.0
                               : static_cast<double>(oy) * (img.height - 1) / (out_h - 1);
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, img.height - 1);
        double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double sx = out_w == 1
                            ? 0.0
                            : static_cast<double>(ox) * (img.width - 1) / (out_w - 1);
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, img.width - 1);
            double fx = sx - x0;
            for (int c = 0; c < img.channels; ++c) {
                double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
                double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
                out(static_cast<Eigen::Index>(oy) * out_w + ox, c) =
                    top * (1 - fy) + bot * fy;
            }
        }
    }
    return out;
}

void init_params(const BackboneConfig& cfg, ParamStore& store, Rng& rng) {
    cfg.validate();
    auto plans = make_plans(cfg);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const ConvPlan& p = plans[i];
        int fan_in = 9 * p.in_c;
        store.add("backbone/conv" + std::to_string(i) + "/W",
                  init_fanin(fan_in, p.out_c, fan_in, rng));
        store.add("backbone/conv" + std::to_string(i) + "/b", Mat::Zero(1, p.out_c));
    }
    const int C = cfg.map_channels, D = cfg.embed_dim;
    for (int u = 0; u < cfg.num_regions; ++u) {
        std::string base = "backbone/roi" + std::to_string(u) + "/";
        store.add(base + "attn_w", init_fanin(C, 1, C, rng));
        store.add(base + "attn_b", Mat::Zero(1, 1));
        store.add(base + "emb_W", init_fanin(C, D, C, rng));
        store.add(base + "emb_b", Mat::Zero(1, D));
    }
}

ad::Var extract_feature_map(ad::Tape& tape, const BackboneConfig& cfg,
                            const ParamBinding& params, const Mat& image_rows,
                            const std::vector<ConvPlan>& plans) {
    if (image_rows.rows() !=
            static_cast<Eigen::Index>(cfg.input_height()) * cfg.input_width() ||
        image_rows.cols() != 3)
        throw Error("extract_feature_map: image shape mismatch");
    ad::Var x = tape.constant(image_rows);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const ConvPlan& p = plans[i];
        ad::Var patches = tape.regroup_rows(tape.gather_rows(x, p.gather), 9);
        std::string base = "backbone/conv" + std::to_string(i) + "/";
        x = tape.add_rowvec(tape.matmul(patches, params[base + "W"]),
                            params[base + "b"]);
        x = tape.relu(x);
    }
    return x; // (map_h*map_w, map_channels)
}

RoiFeatures extract_roi_features(ad::Tape& tape, const BackboneConfig& cfg,
                                 const ParamBinding& params, ad::Var feature_map) {
    const Mat& fm = tape.value(feature_map);
    if (fm.rows() != static_cast<Eigen::Index>(cfg.map_height) * cfg.map_width ||
        fm.cols() != cfg.map_channels)
        throw Error("extract_roi_features: feature map shape mismatch");
    RoiFeatures out;
    std::vector<ad::Var> regions;
    for (int u = 0; u < cfg.num_regions; ++u) {
        std::string base = "backbone/roi" + std::to_string(u) + "/";
        ad::Var logits = tape.add_rowvec(tape.matmul(feature_map, params[base + "attn_w"]),
                                         params[base + "attn_b"]);
        ad::Var att = tape.softmax_vec(logits); // (HW, 1), sums to 1
        out.attention.push_back(att);
        ad::Var pooled = tape.matmul(tape.transpose(att), feature_map); // (1, C)
        ad::Var f = tape.tanh(tape.add_rowvec(
            tape.matmul(pooled, params[base + "emb_W"]), params[base + "emb_b"]));
        regions.push_back(f);
    }
    out.stacked = tape.concat_rows(regions); // (U, D)
    return out;
}

} // namespace smm::backbone

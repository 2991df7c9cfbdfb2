#include "smm/model.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using nlohmann::json;

namespace smm::model {

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.backbone = backbone::BackboneConfig::toy_profile();
    c.sign.model_dim = c.backbone.embed_dim;
    c.message.num_regions = c.backbone.num_regions;
    c.message.dim = c.backbone.embed_dim;
    return c;
}

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.backbone = backbone::BackboneConfig::paper_profile();
    c.sign.model_dim = c.backbone.embed_dim;
    c.message.num_regions = c.backbone.num_regions;
    c.message.dim = c.backbone.embed_dim;
    return c;
}

void ModelConfig::validate() const {
    backbone.validate();
    sign.validate(backbone.num_regions);
    if (sign.model_dim != backbone.embed_dim ||
        message.dim != backbone.embed_dim ||
        message.num_regions != backbone.num_regions)
        throw Error("model config: module dimensions disagree");
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : cfg_(std::move(config)) {
    cfg_.validate();
    Rng rng(seed);
    backbone::init_params(cfg_.backbone, params_, rng);
    sign::init_params(cfg_.sign, params_, rng);
    message::init_params(cfg_.message, params_, rng);
    plans_ = backbone::make_plans(cfg_.backbone);
}

Model::Model(ModelConfig config, ParamStore params)
    : cfg_(std::move(config)), params_(std::move(params)) {
    cfg_.validate();
    plans_ = backbone::make_plans(cfg_.backbone);
}

FrameForward Model::forward_frame(ad::Tape& tape, const ParamBinding& binding,
                                  const data::Image& image) const {
    Mat resized = backbone::resize_image(image, cfg_.backbone.input_height(),
                                         cfg_.backbone.input_width());
    FrameForward f;
    ad::Var map =
        backbone::extract_feature_map(tape, cfg_.backbone, binding, resized, plans_);
    auto roi = backbone::extract_roi_features(tape, cfg_.backbone, binding, map);
    f.rois = roi.stacked;
    f.signs = sign::sign_transform(tape, cfg_.sign, binding, f.rois);
    f.au_logits = sign::au_logits(tape, cfg_.sign, binding, f.signs);
    f.consensus = message::consensus_from_rois(tape, cfg_.message, binding, f.rois);
    auto msg = message::decode_consensus(tape, cfg_.message, binding, f.consensus);
    f.expr_logits = msg.expr_logits;
    f.va = msg.va;
    return f;
}

namespace {

const data::Image& frame_image(const data::FrameRecord& frame) {
    if (!frame.image)
        throw Error("frame " + frame.video_id + "/" +
                    std::to_string(frame.frame_index) + " has no inline image");
    return *frame.image;
}

} // namespace

PredictionBundle Model::predict(const data::FrameRecord& frame) const {
    Features f = trace_features(frame);
    PredictionBundle p = decode_features(f.signs, f.consensus);
    p.video_id = frame.video_id;
    p.frame_index = frame.frame_index;
    return p;
}

Model::Features Model::trace_features(const data::FrameRecord& frame) const {
    ad::Tape tape;
    ParamBinding binding(tape, params_);
    FrameForward f = forward_frame(tape, binding, frame_image(frame));
    Features out;
    out.signs = tape.value(f.signs);
    out.consensus = tape.value(f.consensus).row(0).transpose();
    return out;
}

PredictionBundle Model::decode_features(const Mat& signs, const Vec& consensus) const {
    PredictionBundle p;
    const Mat& head_W = params_.at("sign/head_W");
    const Mat& head_b = params_.at("sign/head_b");
    p.au_probs.resize(cfg_.sign.num_au);
    for (int h = 0; h < cfg_.sign.num_au; ++h) {
        double logit = head_W.row(h).dot(signs.row(h)) + head_b(0, h);
        p.au_probs(h) = 1.0 / (1.0 + std::exp(-logit));
    }
    auto heads = message::heads_from_store(params_);
    auto dec = message::decode(consensus, heads);
    p.expr_logits = dec.expr_logits;
    p.valence = dec.valence;
    p.arousal = dec.arousal;
    return p;
}

namespace {

json config_to_json(const ModelConfig& c) {
    return json{
        {"backbone",
         {{"profile", c.backbone.profile == backbone::Profile::paper ? "paper" : "toy"},
          {"map_height", c.backbone.map_height},
          {"map_width", c.backbone.map_width},
          {"map_channels", c.backbone.map_channels},
          {"num_regions", c.backbone.num_regions},
          {"embed_dim", c.backbone.embed_dim}}},
        {"sign",
         {{"num_au", c.sign.num_au},
          {"layers", c.sign.layers},
          {"heads", c.sign.heads},
          {"model_dim", c.sign.model_dim},
          {"ff_dim", c.sign.ff_dim}}},
        {"message",
         {{"num_regions", c.message.num_regions},
          {"dim", c.message.dim},
          {"num_expr", c.message.num_expr}}}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    const json& b = j.at("backbone");
    c.backbone.profile = b.at("profile").get<std::string>() == "paper"
                             ? backbone::Profile::paper
                             : backbone::Profile::toy;
    c.backbone.map_height = b.at("map_height").get<int>();
    c.backbone.map_width = b.at("map_width").get<int>();
    c.backbone.map_channels = b.at("map_channels").get<int>();
    c.backbone.num_regions = b.at("num_regions").get<int>();
    c.backbone.embed_dim = b.at("embed_dim").get<int>();
    const json& s = j.at("sign");
    c.sign.num_au = s.at("num_au").get<int>();
    c.sign.layers = s.at("layers").get<int>();
    c.sign.heads = s.at("heads").get<int>();
    c.sign.model_dim = s.at("model_dim").get<int>();
    c.sign.ff_dim = s.at("ff_dim").get<int>();
    const json& m = j.at("message");
    c.message.num_regions = m.at("num_regions").get<int>();
    c.message.dim = m.at("dim").get<int>();
    c.message.num_expr = m.at("num_expr").get<int>();
    return c;
}

} // namespace

void Model::save(const std::string& path) const {
    params_.save(path);
    // config rides alongside the parameter archive
    std::ifstream in(path);
    json j;
    in >> j;
    in.close();
    j["model_config"] = config_to_json(cfg_);
    std::ofstream out(path);
    out << j.dump();
}

Model Model::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    json j;
    in >> j;
    if (!j.contains("model_config"))
        throw Error("checkpoint missing model_config");
    ModelConfig cfg = config_from_json(j.at("model_config"));
    return Model(cfg, ParamStore::load(path));
}

} // namespace smm::model

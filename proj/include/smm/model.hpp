#pragma once

#include "smm/backbone.hpp"
#include "smm/data.hpp"
#include "smm/message_space.hpp"
#include "smm/sign_space.hpp"

#include <string>
#include <vector>

namespace smm::model {

struct ModelConfig {
    backbone::BackboneConfig backbone;
    sign::SignConfig sign;
    message::MessageConfig message;

    static ModelConfig toy();
    static ModelConfig paper();
    void validate() const;
};

// Per-frame outputs. Probabilities for AU, raw logits for EXPR, squashed VA.
struct PredictionBundle {
    std::string video_id;
    long frame_index = 0;
    Vec au_probs;    // (H)
    Vec expr_logits; // (C)
    double valence = 0;
    double arousal = 0;
};

// Differentiable handles for one frame inside a tape.
struct FrameForward {
    ad::Var rois;        // (U, D)
    ad::Var signs;       // (H, D)
    ad::Var au_logits;   // (1, H)
    ad::Var consensus;   // (1, D)
    ad::Var expr_logits; // (1, C)
    ad::Var va;          // (1, 2)
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);
    Model(ModelConfig config, ParamStore params);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    FrameForward forward_frame(ad::Tape& tape, const ParamBinding& binding,
                               const data::Image& image) const;

    // Inference without gradients.
    PredictionBundle predict(const data::FrameRecord& frame) const;

    // Per-frame features used by the temporal module: sign features (H, D)
    // and the message-space consensus (D).
    struct Features {
        Mat signs;
        Vec consensus;
    };
    Features trace_features(const data::FrameRecord& frame) const;

    // Frozen-head decoding from (possibly smoothed) features.
    PredictionBundle decode_features(const Mat& signs, const Vec& consensus) const;

    void save(const std::string& path) const;
    static Model load(const std::string& path);

    const std::vector<backbone::ConvPlan>& plans() const { return plans_; }

private:
    ModelConfig cfg_;
    ParamStore params_;
    std::vector<backbone::ConvPlan> plans_;
};

} // namespace smm::model

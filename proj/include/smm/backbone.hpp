#pragma once

#include "smm/ad.hpp"
#include "smm/data.hpp"
#include "smm/params.hpp"

#include <string>
#include <vector>

namespace smm::backbone {

enum class Profile { paper, toy };

struct BackboneConfig {
    Profile profile = Profile::toy;
    int map_height = 8;
    int map_width = 8;
    int map_channels = 32;
    int num_regions = 17;  // U
    int embed_dim = 16;    // D

    // Input edge length; the convolutional stack halves it three times,
    // so it must equal 8 * map size.
    int input_height() const { return map_height * 8; }
    int input_width() const { return map_width * 8; }

    static BackboneConfig paper_profile();
    static BackboneConfig toy_profile();
    void validate() const;
};

// Index plan for one stride-2, 3x3, zero-padded conv expressed as a row
// gather: out row p collects 9 source rows (or -1 for padding).
struct ConvPlan {
    int in_h = 0, in_w = 0, in_c = 0;
    int out_h = 0, out_w = 0, out_c = 0;
    std::vector<int> gather; // out_h*out_w*9 entries
};

ConvPlan make_conv_plan(int in_h, int in_w, int in_c, int out_c);

// Bilinear resize to the backbone input size; returns (h*w, channels).
Mat resize_image(const data::Image& img, int out_h, int out_w);

// Registers conv-stack and per-region ROI parameters under "backbone/".
void init_params(const BackboneConfig& cfg, ParamStore& store, Rng& rng);

// image -> (map_h*map_w, map_channels) feature map, differentiable.
ad::Var extract_feature_map(ad::Tape& tape, const BackboneConfig& cfg,
                            const ParamBinding& params, const Mat& image_rows,
                            const std::vector<ConvPlan>& plans);

std::vector<ConvPlan> make_plans(const BackboneConfig& cfg);

struct RoiFeatures {
    ad::Var stacked;                       // (U, D)
    std::vector<ad::Var> attention;        // per region, (HW, 1) softmax weights
};

// Per-region attention (1x1 conv logits -> spatial softmax), attended
// channel vector, then a dense embedding with tanh to D dims.
RoiFeatures extract_roi_features(ad::Tape& tape, const BackboneConfig& cfg,
                                 const ParamBinding& params, ad::Var feature_map);

} // namespace smm::backbone

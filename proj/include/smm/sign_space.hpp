#pragma once

#include "smm/ad.hpp"
#include "smm/params.hpp"

namespace smm::sign {

struct SignConfig {
    int num_au = 12;      // H
    int layers = 2;       // L; 0 yields the identity encoder (test mode)
    int heads = 4;
    int model_dim = 16;   // D, matches the ROI embedding size
    int ff_dim = 64;      // defaults to 4*D
    bool use_pe = true;   // disabled only in identity-encoder tests

    void validate(int num_regions) const;
};

// Fixed sinusoidal encoding:
//   PE[h, 2k]   = sin(h / 10000^(2k/D))
//   PE[h, 2k+1] = cos(h / 10000^(2k/D))
Mat positional_encoding(int num_positions, int dim);

void init_params(const SignConfig& cfg, ParamStore& store, Rng& rng);

// Adds PE to the first H ROI vectors and runs an L-layer pre-norm
// transformer encoder. rois is (U, D) with U >= H; returns (H, D).
ad::Var sign_transform(ad::Tape& tape, const SignConfig& cfg,
                       const ParamBinding& params, ad::Var rois);

// Diagonal per-AU heads: logit_h = <W_h, S^(h)> + b_h; returns (1, H)
// logits. Probabilities are sigmoid(logits).
ad::Var au_logits(ad::Tape& tape, const SignConfig& cfg,
                  const ParamBinding& params, ad::Var signs);

} // namespace smm::sign

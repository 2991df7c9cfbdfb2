#pragma once

#include "smm/ad.hpp"
#include "smm/params.hpp"

#include <vector>

namespace smm::message {

struct MessageConfig {
    int num_regions = 17; // U
    int dim = 16;         // D
    int num_expr = 8;     // C
};

// Per-region D x D projections A^(u) onto the shared message space.
struct MessageProjections {
    std::vector<Mat> A;
    int dim() const { return A.empty() ? 0 : static_cast<int>(A[0].rows()); }
};

struct MessageHeads {
    Mat expr_W;  // (C, D)
    Vec expr_b;  // (C)
    Mat va_W;    // (2, D)
    Vec va_b;    // (2)
};

// ---- plain-math API (inference and property checks) ----

// M^(u) = A^(u) f, 0-based region index.
Vec project_region(const Vec& f, int u, const MessageProjections& proj);

// Arithmetic mean of the projected vectors.
Vec consensus(const std::vector<Vec>& messages);

struct Decoded {
    Vec expr_logits;    // (C)
    double valence = 0; // tanh-squashed
    double arousal = 0;
    Vec va_presquash;   // (2), affine outputs before tanh
};

Decoded decode(const Vec& consensus_vec, const MessageHeads& heads);

// average-then-decode vs decode-each-then-average, compared on the
// pre-squash affine outputs.
bool verify_linearity_equivalence(const std::vector<Vec>& rois,
                                  const MessageProjections& proj,
                                  const MessageHeads& heads,
                                  double tol = 1e-9);

// ---- parameterized tape builders (training path) ----

// Projections start near identity so the early consensus stays a faithful
// average of the ROI features.
void init_params(const MessageConfig& cfg, ParamStore& store, Rng& rng);

struct MessageOutputs {
    ad::Var consensus;   // (1, D)
    ad::Var expr_logits; // (1, C)
    ad::Var va;          // (1, 2), tanh-squashed
};

// rois is the full (U, D) region stack; all U regions feed the message
// space, including those without AU supervision.
ad::Var consensus_from_rois(ad::Tape& tape, const MessageConfig& cfg,
                            const ParamBinding& params, ad::Var rois);
MessageOutputs decode_consensus(ad::Tape& tape, const MessageConfig& cfg,
                                const ParamBinding& params, ad::Var consensus);

MessageProjections projections_from_store(const MessageConfig& cfg,
                                          const ParamStore& store);
MessageHeads heads_from_store(const ParamStore& store);

} // namespace smm::message

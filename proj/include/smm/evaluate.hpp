#pragma once

#include "smm/data.hpp"
#include "smm/metrics.hpp"
#include "smm/model.hpp"

#include <vector>

namespace smm::evaluate {

// Joins predictions with labels by (video_id, frame_index) and computes
// per-task metrics plus the composite. Tasks without labeled frames are
// left unset and the composite flagged partial. With lenient=true, AUs or
// classes without data are skipped instead of raising (used for small
// cross-validation folds).
metrics::Report evaluate_predictions(const std::vector<model::PredictionBundle>& preds,
                                     const data::DatasetIndex& index,
                                     bool lenient = false);

} // namespace smm::evaluate

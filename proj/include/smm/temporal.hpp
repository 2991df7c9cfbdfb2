#pragma once

#include "smm/data.hpp"
#include "smm/model.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace smm::temporal {

struct SmoothingConfig {
    double mu_au = 7.0;
    double mu_msg = 9.0;
    std::vector<double> grid = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int folds = 3;
};

// Lambda_t = (eps_t + mu * Lambda_{t-1}) / (1 + mu), Lambda_1 = eps_1.
// features is (T, D); never applied across video boundaries by callers.
Mat smooth_sequence(const Mat& features, double mu);

// Per-video feature sequences plus their labels, ready for smoothing and
// frozen-head decoding.
struct VideoTrace {
    std::string video_id;
    std::vector<long> frame_indices;
    Mat signs;     // (T, H*D), row-major flattened sign features
    Mat consensus; // (T, D)
    int num_au = 0;
    int dim = 0;
    Eigen::MatrixXi au_labels;   // (T, H)
    Eigen::VectorXi expr_labels; // (T)
    Mat va_labels;               // (T, 2)
};

std::vector<VideoTrace> trace_dataset(const model::Model& model,
                                      const data::DatasetIndex& index);

// Decodes a (possibly smoothed) trace with frozen heads.
using Decoder = std::function<model::PredictionBundle(const Mat& signs, const Vec& consensus)>;

std::vector<model::PredictionBundle> decode_trace(const VideoTrace& trace,
                                                  const Decoder& decoder,
                                                  double mu_au, double mu_msg);

// Smooth sign features with mu_au and message features with mu_msg, then
// re-decode without re-training. With both mu = 0 the static predictions
// are reproduced exactly.
std::vector<model::PredictionBundle> apply_smoothed_heads(
    const model::Model& model, const data::DatasetIndex& index,
    const SmoothingConfig& config);

struct FoldEntry {
    int fold = 0;
    double mu = 0;
    double f1_au = std::numeric_limits<double>::quiet_NaN();
    double macro_f1 = std::numeric_limits<double>::quiet_NaN();
    double ccc_va = std::numeric_limits<double>::quiet_NaN();
};

struct GridSearchResult {
    double mu_au = 0;
    double mu_msg = 0;
    std::vector<FoldEntry> report;

    std::string report_json() const;
};

// Three-fold (by video-id hash) grid search: mu_au maximizes mean F1-AU,
// mu_msg maximizes the mean of macro-F1 and CCC-VA. Ties resolve to the
// smallest mu.
GridSearchResult grid_search_mu(const std::vector<VideoTrace>& traces,
                                const Decoder& decoder,
                                const data::DatasetIndex& index,
                                const std::vector<double>& grid, int folds,
                                std::uint64_t seed);

void write_fold_report(const GridSearchResult& result, const std::string& path);

} // namespace smm::temporal

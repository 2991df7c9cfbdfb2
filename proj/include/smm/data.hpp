#pragma once

#include "smm/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace smm::data {

constexpr int kNumAu = 12;       // H: annotated action units
constexpr int kNumExpr = 8;      // C: six basic emotions + neutral + other
constexpr double kVaMissing = -5.0;

// Image tensor, row-major (y, x, channel), values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    Vec pixels; // height*width*channels

    double at(int y, int x, int c) const {
        return pixels((static_cast<Eigen::Index>(y) * width + x) * channels + c);
    }
    double& at(int y, int x, int c) {
        return pixels((static_cast<Eigen::Index>(y) * width + x) * channels + c);
    }
};

// One frame with (possibly partial) multi-task annotations.
// -1 marks a missing categorical label, -5.0 a missing continuous one.
struct FrameRecord {
    std::string video_id;
    long frame_index = 0;
    std::string image_path;          // set when the image lives on disk
    std::optional<Image> image;      // set when inline
    std::vector<int> au_labels;      // size H, entries in {0,1,-1}
    int expr_label = -1;             // -1 or 0..7
    double valence = kVaMissing;     // [-1,1] or -5.0
    double arousal = kVaMissing;

    bool has_au() const;
    bool has_expr() const { return expr_label >= 0; }
    bool has_va() const { return valence != kVaMissing; }
};

struct VideoRange {
    std::size_t begin = 0; // [begin, end) into records
    std::size_t end = 0;
};

struct TaskCoverage {
    std::size_t au = 0, expr = 0, va = 0;
};

// Immutable after construction; records are sorted by (video_id, frame_index).
struct DatasetIndex {
    std::vector<FrameRecord> records;
    std::map<std::string, VideoRange> videos;
    TaskCoverage task_coverage;
};

struct TaskWeights {
    Vec au_weights;   // size H, P^AU
    Vec expr_weights; // size C, P^EXPR
};

DatasetIndex build_index(std::vector<FrameRecord> records);

DatasetIndex load_manifest(const std::string& path);
void save_manifest(const DatasetIndex& index, const std::string& path);

// P^AU_i = (#labeled 0) / (#labeled 1), ignoring missing labels.
Vec compute_au_weights(const DatasetIndex& index, int num_au = kNumAu);

// Mean-normalized inverse frequency: P^EXPR_i = N / (C * n_i).
Vec compute_expr_weights(const DatasetIndex& index, int num_classes = kNumExpr);

// Keeps frames at within-video ordinal positions 0, factor, 2*factor, ...
DatasetIndex downsample_sequence(const DatasetIndex& index, int factor);

struct SyntheticConfig {
    int au_videos = 2;
    int expr_videos = 2;
    int va_videos = 2;
    int frames_per_video = 8;
    // Per-group overrides; 0 falls back to frames_per_video.
    int au_frames = 0;
    int expr_frames = 0;
    int va_frames = 0;
    int image_size = 64;
    int num_au = kNumAu;
    int num_expr = kNumExpr;
    double pixel_noise = 0.02;
};

// Three disjoint video groups, one labeled task per group; labels are
// planted as geometric brightness patterns so the mapping is learnable
// from pixels. Deterministic for a fixed seed.
DatasetIndex make_synthetic_dataset(const SyntheticConfig& config, std::uint64_t seed);

} // namespace smm::data

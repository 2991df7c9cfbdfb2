#pragma once

#include "smm/data.hpp"
#include "smm/losses.hpp"
#include "smm/metrics.hpp"
#include "smm/model.hpp"
#include "smm/temporal.hpp"

#include <optional>
#include <string>
#include <vector>

namespace smm::trainer {

struct TrainConfig {
    double lr0 = 1e-3;
    double momentum = 0.9;
    long total_iters = 2000;       // paper-scale runs use 3e5
    int batch_au = 8;
    int batch_expr = 8;
    int batch_va = 8;
    std::uint64_t seed = 0;
    long checkpoint_every = 0;     // 0: only the final checkpoint
    std::string out_dir;           // checkpoints land here when set

    void validate() const;
};

// lr(t) = lr0 * (1 + cos(pi t / total)) / 2
double cosine_lr(long iter, long total, double lr0);

struct LogEntry {
    long iter = 0;
    double lr = 0;
    double loss_au = 0;
    double loss_expr = 0;
    double loss_va = 0;
    double loss = 0;
};

void write_log(const std::vector<LogEntry>& log, const std::string& path);
std::vector<LogEntry> read_log(const std::string& path);

// Deterministic round-robin sampler over the three uni-task frame pools,
// reshuffling each pool on exhaustion.
class BatchSampler {
public:
    BatchSampler(const data::DatasetIndex& index, const TrainConfig& cfg);
    // Frame indices into index.records for the next mixed batch.
    std::vector<std::size_t> next();

private:
    std::vector<std::size_t> draw(std::vector<std::size_t>& pool,
                                  std::size_t& cursor, int count);
    const TrainConfig cfg_;
    Rng rng_;
    std::vector<std::size_t> au_pool_, expr_pool_, va_pool_;
    std::size_t au_cursor_ = 0, expr_cursor_ = 0, va_cursor_ = 0;
};

// Assembles the sentinel-masked loss labels for the sampled frames.
losses::LossBatch make_batch(const data::DatasetIndex& index,
                             const std::vector<std::size_t>& frames,
                             const Vec& au_weights, const Vec& expr_weights,
                             int num_au, int num_expr);

struct TrainResult {
    std::vector<LogEntry> log;
};

// SGD with classical momentum on the summed multi-task loss. Single
// threaded; bitwise deterministic for a fixed seed.
TrainResult train(model::Model& model, const data::DatasetIndex& dataset,
                  const TrainConfig& config);

metrics::Report evaluate(const model::Model& model, const data::DatasetIndex& split,
                         const std::optional<temporal::SmoothingConfig>& smoothing = {});

std::vector<model::PredictionBundle> predict_all(
    const model::Model& model, const data::DatasetIndex& split,
    const std::optional<temporal::SmoothingConfig>& smoothing = {});

} // namespace smm::trainer

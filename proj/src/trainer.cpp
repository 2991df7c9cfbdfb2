#include "smm/trainer.hpp"

#include "smm/evaluate.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>

using nlohmann::json;

namespace smm::trainer {

void TrainConfig::validate() const {
    if (lr0 < 0) throw Error("train config: lr0 must be >= 0");
    if (momentum < 0 || momentum >= 1) throw Error("train config: momentum in [0,1)");
    if (total_iters < 1) throw Error("train config: total_iters must be >= 1");
    if (batch_au < 0 || batch_expr < 0 || batch_va < 0)
        throw Error("train config: negative sub-batch size");
    if (batch_au + batch_expr + batch_va == 0)
        throw Error("train config: empty batch composition");
}

double cosine_lr(long iter, long total, double lr0) {
    if (iter < 0 || iter > total) throw Error("cosine_lr: iter outside [0, total]");
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(iter) /
                                       static_cast<double>(total)));
}

void write_log(const std::vector<LogEntry>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write training log: " + path);
    for (const auto& e : log) {
        json j{{"iter", e.iter},     {"lr", e.lr},
               {"loss_au", e.loss_au}, {"loss_expr", e.loss_expr},
               {"loss_va", e.loss_va}, {"loss", e.loss}};
        out << j.dump() << "\n";
    }
}

std::vector<LogEntry> read_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open training log: " + path);
    std::vector<LogEntry> log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        LogEntry e;
        e.iter = j.at("iter").get<long>();
        e.lr = j.at("lr").get<double>();
        e.loss_au = j.at("loss_au").get<double>();
        e.loss_expr = j.at("loss_expr").get<double>();
        e.loss_va = j.at("loss_va").get<double>();
        e.loss = j.at("loss").get<double>();
        log.push_back(e);
    }
    return log;
}

BatchSampler::BatchSampler(const data::DatasetIndex& index, const TrainConfig& cfg)
    : cfg_(cfg), rng_(cfg.seed ^ 0x5eedba7c5eedba7cULL) {
    for (std::size_t i = 0; i < index.records.size(); ++i) {
        const auto& r = index.records[i];
        if (r.has_au()) au_pool_.push_back(i);
        if (r.has_expr()) expr_pool_.push_back(i);
        if (r.has_va()) va_pool_.push_back(i);
    }
    if (cfg.batch_au > 0 && au_pool_.empty())
        throw Error("batch requests AU samples but the dataset has none");
    if (cfg.batch_expr > 0 && expr_pool_.empty())
        throw Error("batch requests EXPR samples but the dataset has none");
    if (cfg.batch_va > 0 && va_pool_.empty())
        throw Error("batch requests VA samples but the dataset has none");
}

std::vector<std::size_t> BatchSampler::draw(std::vector<std::size_t>& pool,
                                            std::size_t& cursor, int count) {
    std::vector<std::size_t> out;
    for (int k = 0; k < count; ++k) {
        if (cursor == 0 || cursor >= pool.size()) {
            // Fisher-Yates reshuffle on exhaustion
            for (std::size_t i = pool.size(); i > 1; --i)
                std::swap(pool[i - 1], pool[rng_.below(i)]);
            cursor = 0;
        }
        out.push_back(pool[cursor++]);
    }
    return out;
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> frames;
    for (std::size_t i : draw(au_pool_, au_cursor_, cfg_.batch_au)) frames.push_back(i);
    for (std::size_t i : draw(expr_pool_, expr_cursor_, cfg_.batch_expr))
        frames.push_back(i);
    for (std::size_t i : draw(va_pool_, va_cursor_, cfg_.batch_va)) frames.push_back(i);
    return frames;
}

losses::LossBatch make_batch(const data::DatasetIndex& index,
                             const std::vector<std::size_t>& frames,
                             const Vec& au_weights, const Vec& expr_weights,
                             int num_au, int num_expr) {
    const Eigen::Index n = static_cast<Eigen::Index>(frames.size());
    losses::LossBatch b;
    b.au_labels = Eigen::MatrixXi::Constant(n, num_au, -1);
    b.expr_labels = Eigen::VectorXi::Constant(n, -1);
    b.va_labels = Mat::Constant(n, 2, data::kVaMissing);
    b.au_weights = au_weights;
    b.expr_weights = expr_weights;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = index.records[frames[static_cast<std::size_t>(i)]];
        for (int h = 0; h < num_au && h < static_cast<int>(r.au_labels.size()); ++h)
            b.au_labels(i, h) = r.au_labels[static_cast<std::size_t>(h)];
        b.expr_labels(i) = r.expr_label;
        if (r.has_va()) {
            b.va_labels(i, 0) = r.valence;
            b.va_labels(i, 1) = r.arousal;
        }
    }
    return b;
}

TrainResult train(model::Model& model, const data::DatasetIndex& dataset,
                  const TrainConfig& config) {
    config.validate();
    const int H = model.config().sign.num_au;
    const int C = model.config().message.num_expr;

    Vec au_w = Vec::Ones(H);
    Vec expr_w = Vec::Ones(C);
    if (config.batch_au > 0) au_w = data::compute_au_weights(dataset, H);
    if (config.batch_expr > 0) expr_w = data::compute_expr_weights(dataset, C);

    BatchSampler sampler(dataset, config);
    ParamStore& params = model.params();
    std::map<std::string, Mat> velocity;
    for (const auto& name : params.order())
        velocity[name] = Mat::Zero(params.at(name).rows(), params.at(name).cols());

    TrainResult result;
    for (long iter = 0; iter < config.total_iters; ++iter) {
        double lr = cosine_lr(iter, config.total_iters, config.lr0);
        auto frames = sampler.next();

        ad::Tape tape;
        ParamBinding binding(tape, params);
        std::vector<ad::Var> au_rows, expr_rows, va_rows;
        for (std::size_t f : frames) {
            const auto& rec = dataset.records[f];
            auto fwd = model.forward_frame(tape, binding, *rec.image);
            au_rows.push_back(fwd.au_logits);
            expr_rows.push_back(fwd.expr_logits);
            va_rows.push_back(fwd.va);
        }
        ad::Var au_logits = tape.concat_rows(au_rows);
        ad::Var expr_logits = tape.concat_rows(expr_rows);
        ad::Var va_pred = tape.concat_rows(va_rows);

        losses::LossBatch batch = make_batch(dataset, frames, au_w, expr_w, H, C);
        auto total = losses::total_loss_graph(tape, au_logits, expr_logits, va_pred, batch);

        LogEntry e;
        e.iter = iter;
        e.lr = lr;
        e.loss_au = tape.scalar(total.au.value);
        e.loss_expr = tape.scalar(total.expr.value);
        e.loss_va = tape.scalar(total.va.value);
        e.loss = tape.scalar(total.value);
        result.log.push_back(e);

        if (!std::isfinite(e.loss)) {
            if (!config.out_dir.empty())
                model.save(config.out_dir + "/checkpoint_diverged.json");
            throw Error("non-finite loss at iteration " + std::to_string(iter));
        }

        tape.backward(total.value);
        for (const auto& name : params.order()) {
            ad::Var v = binding[name];
            Mat& vel = velocity[name];
            vel = config.momentum * vel + tape.grad(v);
            params.at(name) -= lr * vel;
        }

        if (config.checkpoint_every > 0 && !config.out_dir.empty() &&
            (iter + 1) % config.checkpoint_every == 0)
            model.save(config.out_dir + "/checkpoint_" + std::to_string(iter + 1) +
                       ".json");
    }
    return result;
}

std::vector<model::PredictionBundle> predict_all(
    const model::Model& model, const data::DatasetIndex& split,
    const std::optional<temporal::SmoothingConfig>& smoothing) {
    if (smoothing) return temporal::apply_smoothed_heads(model, split, *smoothing);
    std::vector<model::PredictionBundle> preds;
    preds.reserve(split.records.size());
    for (const auto& r : split.records) preds.push_back(model.predict(r));
    return preds;
}

metrics::Report evaluate(const model::Model& model, const data::DatasetIndex& split,
                         const std::optional<temporal::SmoothingConfig>& smoothing) {
    return smm::evaluate::evaluate_predictions(predict_all(model, split, smoothing),
                                               split);
}

} // namespace smm::trainer

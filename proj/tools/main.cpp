// smm: synthesize data, train, evaluate, search temporal smoothing, export
// predictions, and render report plots for the SMM-EmotionNet pipeline.

#include "smm/data.hpp"
#include "smm/evaluate.hpp"
#include "smm/model.hpp"
#include "smm/temporal.hpp"
#include "smm/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string data_path;
    std::string out_path;
    std::uint64_t seed = 0;
    std::string profile = "toy";
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw smm::Error("cannot open config: " + path);
    json j;
    in >> j;
    return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

smm::model::ModelConfig model_config_from(const json& cfg, const std::string& profile) {
    smm::model::ModelConfig mc = profile == "paper" ? smm::model::ModelConfig::paper()
                                                    : smm::model::ModelConfig::toy();
    if (cfg.contains("backbone")) {
        const json& b = cfg.at("backbone");
        maybe(b, "map_height", mc.backbone.map_height);
        maybe(b, "map_width", mc.backbone.map_width);
        maybe(b, "map_channels", mc.backbone.map_channels);
        maybe(b, "num_regions", mc.backbone.num_regions);
        maybe(b, "embed_dim", mc.backbone.embed_dim);
        mc.message.num_regions = mc.backbone.num_regions;
        mc.message.dim = mc.backbone.embed_dim;
        mc.sign.model_dim = mc.backbone.embed_dim;
        mc.sign.ff_dim = 4 * mc.backbone.embed_dim;
    }
    if (cfg.contains("sign")) {
        const json& s = cfg.at("sign");
        maybe(s, "num_au", mc.sign.num_au);
        maybe(s, "layers", mc.sign.layers);
        maybe(s, "heads", mc.sign.heads);
        maybe(s, "ff_dim", mc.sign.ff_dim);
    }
    return mc;
}

smm::trainer::TrainConfig train_config_from(const json& cfg) {
    smm::trainer::TrainConfig tc;
    if (!cfg.contains("train")) return tc;
    const json& t = cfg.at("train");
    maybe(t, "lr0", tc.lr0);
    maybe(t, "momentum", tc.momentum);
    maybe(t, "total_iters", tc.total_iters);
    maybe(t, "batch_au", tc.batch_au);
    maybe(t, "batch_expr", tc.batch_expr);
    maybe(t, "batch_va", tc.batch_va);
    maybe(t, "checkpoint_every", tc.checkpoint_every);
    return tc;
}

std::vector<double> parse_grid(const std::string& spec) {
    // "a..b" inclusive integer range, or comma-separated values
    std::vector<double> grid;
    auto dots = spec.find("..");
    if (dots != std::string::npos) {
        int lo = std::stoi(spec.substr(0, dots));
        int hi = std::stoi(spec.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) grid.push_back(v);
    } else {
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    }
    if (grid.empty()) throw smm::Error("empty mu grid: " + spec);
    return grid;
}

void write_predictions_csv(const std::vector<smm::model::PredictionBundle>& preds,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw smm::Error("cannot write predictions: " + path);
    out << "video_id,frame_index";
    for (int h = 0; h < 12; ++h) out << ",au" << h;
    for (int c = 0; c < 8; ++c) out << ",expr" << c;
    out << ",valence,arousal\n";
    out.precision(17);
    for (const auto& p : preds) {
        out << p.video_id << "," << p.frame_index;
        for (Eigen::Index h = 0; h < p.au_probs.size(); ++h) out << "," << p.au_probs(h);
        // softmax over logits for the exported class probabilities
        Eigen::ArrayXd e = (p.expr_logits.array() - p.expr_logits.maxCoeff()).exp();
        Eigen::ArrayXd probs = e / e.sum();
        for (Eigen::Index c = 0; c < probs.size(); ++c) out << "," << probs(c);
        out << "," << p.valence << "," << p.arousal << "\n";
    }
}

std::vector<smm::model::PredictionBundle> read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw smm::Error("cannot open predictions: " + path);
    std::string line;
    if (!std::getline(in, line)) throw smm::Error("empty predictions file");
    std::vector<smm::model::PredictionBundle> preds;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> fields;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        if (fields.size() != 2 + 12 + 8 + 2)
            throw smm::Error("bad prediction row: " + line);
        smm::model::PredictionBundle p;
        p.video_id = fields[0];
        p.frame_index = std::stol(fields[1]);
        p.au_probs.resize(12);
        for (int h = 0; h < 12; ++h) p.au_probs(h) = std::stod(fields[2 + h]);
        p.expr_logits.resize(8);
        // exported values are probabilities; log restores argmax order
        for (int c = 0; c < 8; ++c)
            p.expr_logits(c) = std::log(std::max(std::stod(fields[14 + c]), 1e-300));
        p.valence = std::stod(fields[22]);
        p.arousal = std::stod(fields[23]);
        preds.push_back(std::move(p));
    }
    return preds;
}

// Minimal SVG polyline plot.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const int W = 720, Hpx = 420, pad = 50;
    double lo = 1e300, hi = -1e300;
    std::size_t n = 0;
    for (const auto& [name, ys] : series) {
        n = std::max(n, ys.size());
        for (double y : ys) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    }
    if (n < 2) n = 2;
    if (hi <= lo) hi = lo + 1;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ofstream out(path);
    if (!out) throw smm::Error("cannot write plot: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
        << Hpx << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
        << title << "</text>\n";
    int ci = 0;
    int legend_y = 36;
    for (const auto& [name, ys] : series) {
        const char* col = colors[ci++ % 5];
        out << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            double x = pad + (W - 2.0 * pad) * i / (n - 1);
            double y = Hpx - pad - (Hpx - 2.0 * pad) * (ys[i] - lo) / (hi - lo);
            out << x << "," << y << " ";
        }
        out << "'/>\n<text x='" << W - pad - 150 << "' y='" << legend_y
            << "' font-size='12' fill='" << col << "'>" << name << "</text>\n";
        legend_y += 16;
    }
    out << "<text x='8' y='" << pad << "' font-size='11'>" << hi << "</text>\n"
        << "<text x='8' y='" << Hpx - pad << "' font-size='11'>" << lo << "</text>\n"
        << "</svg>\n";
}

std::optional<smm::temporal::SmoothingConfig> smoothing_from(double mu_au, double mu_msg) {
    if (mu_au < 0 && mu_msg < 0) return std::nullopt;
    smm::temporal::SmoothingConfig sc;
    sc.mu_au = std::max(mu_au, 0.0);
    sc.mu_msg = std::max(mu_msg, 0.0);
    return sc;
}

int run(int argc, char** argv) {
    CLI::App app{"SMM-EmotionNet multi-task affect pipeline"};
    app.require_subcommand(1);

    CommonOpts opt;
    app.add_option("--config", opt.config_path, "JSON config file")->capture_default_str();
    app.add_option("--seed", opt.seed, "global RNG seed")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "emit a synthetic dataset manifest");
    smm::data::SyntheticConfig scfg;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output manifest path")->required();
    synth->add_option("--au-videos", scfg.au_videos);
    synth->add_option("--expr-videos", scfg.expr_videos);
    synth->add_option("--va-videos", scfg.va_videos);
    synth->add_option("--frames", scfg.frames_per_video);
    synth->add_option("--au-frames", scfg.au_frames);
    synth->add_option("--expr-frames", scfg.expr_frames);
    synth->add_option("--va-frames", scfg.va_frames);
    synth->add_option("--image-size", scfg.image_size);

    // train
    auto* train = app.add_subcommand("train", "train a model on a manifest");
    std::string train_data, train_out;
    std::string train_profile = "toy";
    long train_iters = -1;
    double train_lr = -1;
    train->add_option("--data", train_data, "training manifest")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--profile", train_profile)->check(CLI::IsMember({"toy", "paper"}));
    train->add_option("--iters", train_iters, "override total iterations");
    train->add_option("--lr", train_lr, "override initial learning rate");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    std::string eval_data, eval_ckpt, eval_out, eval_from_preds;
    double eval_mu_au = -1, eval_mu_msg = -1;
    eval->add_option("--data", eval_data, "evaluation manifest")->required();
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint");
    eval->add_option("--from-predictions", eval_from_preds,
                     "score an exported prediction file instead of a checkpoint");
    eval->add_option("--out", eval_out, "report output path");
    eval->add_option("--mu-au", eval_mu_au, "sign-space smoothing (omit for static)");
    eval->add_option("--mu-msg", eval_mu_msg, "message-space smoothing");

    // smooth-search
    auto* search = app.add_subcommand("smooth-search", "grid search the smoothing mu");
    std::string search_data, search_ckpt, search_out;
    std::string grid_spec = "0..10";
    int folds = 3;
    search->add_option("--data", search_data)->required();
    search->add_option("--checkpoint", search_ckpt)->required();
    search->add_option("--out", search_out, "fold report path")->required();
    search->add_option("--grid", grid_spec, "mu grid, e.g. 0..10 or 0,2,4");
    search->add_option("--folds", folds);

    // predict
    auto* predict = app.add_subcommand("predict", "export per-frame predictions");
    std::string pred_data, pred_ckpt, pred_out;
    double pred_mu_au = -1, pred_mu_msg = -1;
    predict->add_option("--data", pred_data)->required();
    predict->add_option("--checkpoint", pred_ckpt)->required();
    predict->add_option("--out", pred_out)->required();
    predict->add_option("--mu-au", pred_mu_au);
    predict->add_option("--mu-msg", pred_mu_msg);

    // report
    auto* report = app.add_subcommand("report", "render metric tables and plots");
    std::string report_log, report_folds, report_out;
    report->add_option("--log", report_log, "training log (JSONL)");
    report->add_option("--fold-report", report_folds, "smooth-search fold report");
    report->add_option("--out", report_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    json cfg = load_config_file(opt.config_path);

    if (*synth) {
        auto index = smm::data::make_synthetic_dataset(scfg, opt.seed);
        smm::data::save_manifest(index, synth_out);
        std::cout << "wrote " << index.records.size() << " frames to " << synth_out
                  << "\n";
        return 0;
    }

    if (*train) {
        auto dataset = smm::data::load_manifest(train_data);
        auto mc = model_config_from(cfg, train_profile);
        auto tc = train_config_from(cfg);
        tc.seed = opt.seed;
        if (train_iters > 0) tc.total_iters = train_iters;
        if (train_lr >= 0) tc.lr0 = train_lr;
        fs::create_directories(train_out);
        tc.out_dir = train_out;
        smm::model::Model model(mc, opt.seed);
        auto result = smm::trainer::train(model, dataset, tc);
        model.save(train_out + "/checkpoint.json");
        smm::trainer::write_log(result.log, train_out + "/train_log.jsonl");
        std::cout << "final loss " << result.log.back().loss << " after "
                  << result.log.size() << " iterations\n";
        return 0;
    }

    if (*eval) {
        auto dataset = smm::data::load_manifest(eval_data);
        smm::metrics::Report rep;
        if (!eval_from_preds.empty()) {
            rep = smm::evaluate::evaluate_predictions(read_predictions_csv(eval_from_preds),
                                                      dataset);
        } else {
            if (eval_ckpt.empty())
                throw smm::Error("evaluate needs --checkpoint or --from-predictions");
            auto model = smm::model::Model::load(eval_ckpt);
            rep = smm::trainer::evaluate(model, dataset,
                                         smoothing_from(eval_mu_au, eval_mu_msg));
        }
        std::cout << rep.to_json() << "\n";
        if (!eval_out.empty()) smm::metrics::write_report(rep, eval_out);
        return 0;
    }

    if (*search) {
        auto dataset = smm::data::load_manifest(search_data);
        auto model = smm::model::Model::load(search_ckpt);
        auto traces = smm::temporal::trace_dataset(model, dataset);
        smm::temporal::Decoder dec = [&model](const smm::Mat& s, const smm::Vec& c) {
            return model.decode_features(s, c);
        };
        auto result = smm::temporal::grid_search_mu(traces, dec, dataset,
                                                    parse_grid(grid_spec), folds,
                                                    opt.seed);
        smm::temporal::write_fold_report(result, search_out);
        std::cout << "selected mu_au=" << result.mu_au << " mu_msg=" << result.mu_msg
                  << "\n";
        return 0;
    }

    if (*predict) {
        auto dataset = smm::data::load_manifest(pred_data);
        auto model = smm::model::Model::load(pred_ckpt);
        auto preds = smm::trainer::predict_all(model, dataset,
                                               smoothing_from(pred_mu_au, pred_mu_msg));
        write_predictions_csv(preds, pred_out);
        std::cout << "wrote " << preds.size() << " rows to " << pred_out << "\n";
        return 0;
    }

    if (*report) {
        fs::create_directories(report_out);
        if (!report_log.empty()) {
            auto log = smm::trainer::read_log(report_log);
            std::vector<double> lr, lau, lexpr, lva, ltot;
            for (const auto& e : log) {
                lr.push_back(e.lr);
                lau.push_back(e.loss_au);
                lexpr.push_back(e.loss_expr);
                lva.push_back(e.loss_va);
                ltot.push_back(e.loss);
            }
            write_svg_plot(report_out + "/loss_curves.svg", "training loss",
                           {{"total", ltot}, {"au", lau}, {"expr", lexpr}, {"va", lva}});
            write_svg_plot(report_out + "/lr_curve.svg", "learning rate", {{"lr", lr}});
        }
        if (!report_folds.empty()) {
            std::ifstream in(report_folds);
            if (!in) throw smm::Error("cannot open fold report: " + report_folds);
            json j;
            in >> j;
            std::map<std::string, std::map<double, std::vector<double>>> by_metric;
            for (const auto& row : j.at("folds")) {
                double mu = row.at("mu").get<double>();
                for (const char* key : {"f1_au", "macro_f1_expr", "ccc_va_mean"})
                    if (row.contains(key))
                        by_metric[key][mu].push_back(row.at(key).get<double>());
            }
            std::vector<std::pair<std::string, std::vector<double>>> series;
            for (const auto& [metric, by_mu] : by_metric) {
                std::vector<double> means;
                for (const auto& [mu, vals] : by_mu) {
                    double s = 0;
                    for (double v : vals) s += v;
                    means.push_back(s / vals.size());
                }
                series.emplace_back(metric, means);
            }
            write_svg_plot(report_out + "/mu_metrics.svg", "metric vs mu", series);
        }
        std::cout << "report written to " << report_out << "\n";
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "smm/data.hpp"
#include "smm/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_binary;
std::string g_dir;

int run_cli(const std::string& args) {
    std::string cmd = g_binary + " " + args + " >" + g_dir + "/stdout.txt 2>" +
                      g_dir + "/stderr.txt";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string manifest_path() { return g_dir + "/data.jsonl"; }
std::string config_path() { return g_dir + "/config.json"; }
std::string run_dir() { return g_dir + "/run"; }
std::string checkpoint_path() { return run_dir() + "/checkpoint.json"; }

} // namespace

TEST_CASE("missing subcommand and unknown flags exit with code 2") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("--no-such-flag") == 2);
    CHECK(run_cli("synth") == 2); // --out is required
}

TEST_CASE("runtime failures exit with code 1 and a diagnostic") {
    CHECK(run_cli("train --data " + g_dir + "/absent.jsonl --out " + g_dir +
                  "/x") == 1);
    std::string err = read_file(g_dir + "/stderr.txt");
    CHECK(err.find("error:") != std::string::npos);
}

TEST_CASE("synth writes a loadable manifest") {
    int rc = run_cli("--seed 5 synth --out " + manifest_path() +
                     " --au-videos 3 --expr-videos 3 --va-videos 3 "
                     "--frames 4 --expr-frames 8 --image-size 16");
    REQUIRE(rc == 0);
    auto index = smm::data::load_manifest(manifest_path());
    CHECK(index.records.size() == 48);
    CHECK(index.videos.size() == 9);
}

TEST_CASE("train produces a checkpoint and a full log") {
    {
        json cfg;
        cfg["backbone"] = {{"map_height", 2}, {"map_width", 2},
                           {"map_channels", 8}, {"embed_dim", 8}};
        cfg["sign"] = {{"layers", 1}};
        cfg["train"] = {{"batch_au", 4}, {"batch_expr", 4}, {"batch_va", 4}};
        std::ofstream out(config_path());
        out << cfg.dump(2);
    }
    int rc = run_cli("--config " + config_path() + " --seed 3 train --data " +
                     manifest_path() + " --out " + run_dir() + " --iters 4");
    REQUIRE(rc == 0);
    CHECK(fs::exists(checkpoint_path()));
    auto log = smm::trainer::read_log(run_dir() + "/train_log.jsonl");
    REQUIRE(log.size() == 4);
    for (const auto& e : log) CHECK(std::isfinite(e.loss));
    CHECK(log[0].lr > log[3].lr); // cosine decay
}

TEST_CASE("training is reproducible for a fixed seed") {
    int rc = run_cli("--config " + config_path() + " --seed 3 train --data " +
                     manifest_path() + " --out " + g_dir + "/run2 --iters 4");
    REQUIRE(rc == 0);
    CHECK(read_file(checkpoint_path()) == read_file(g_dir + "/run2/checkpoint.json"));
    CHECK(read_file(run_dir() + "/train_log.jsonl") ==
          read_file(g_dir + "/run2/train_log.jsonl"));
}

TEST_CASE("evaluate from a checkpoint writes a report") {
    int rc = run_cli("evaluate --data " + manifest_path() + " --checkpoint " +
                     checkpoint_path() + " --out " + g_dir + "/report.json");
    REQUIRE(rc == 0);
    json rep = json::parse(read_file(g_dir + "/report.json"));
    CHECK(rep.contains("composite"));
    CHECK(rep.contains("f1_au_mean"));
    CHECK(rep.contains("macro_f1_expr"));
}

TEST_CASE("predict exports csv rows for every frame") {
    int rc = run_cli("predict --data " + manifest_path() + " --checkpoint " +
                     checkpoint_path() + " --out " + g_dir + "/preds.csv");
    REQUIRE(rc == 0);
    std::ifstream in(g_dir + "/preds.csv");
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line.rfind("video_id,frame_index,au0", 0) == 0);
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 48);
}

TEST_CASE("scoring exported predictions matches scoring the checkpoint") {
    int rc = run_cli("evaluate --data " + manifest_path() + " --from-predictions " +
                     g_dir + "/preds.csv --out " + g_dir + "/report_csv.json");
    REQUIRE(rc == 0);
    json a = json::parse(read_file(g_dir + "/report.json"));
    json b = json::parse(read_file(g_dir + "/report_csv.json"));
    CHECK(a.at("composite").get<double>() ==
          doctest::Approx(b.at("composite").get<double>()).epsilon(1e-9));
    CHECK(a.at("f1_au_mean").get<double>() ==
          doctest::Approx(b.at("f1_au_mean").get<double>()));
    CHECK(a.at("macro_f1_expr").get<double>() ==
          doctest::Approx(b.at("macro_f1_expr").get<double>()));
    CHECK(a.at("ccc_va_mean").get<double>() ==
          doctest::Approx(b.at("ccc_va_mean").get<double>()).epsilon(1e-9));
}

TEST_CASE("smooth-search covers the grid across folds") {
    int rc = run_cli("--seed 4 smooth-search --data " + manifest_path() +
                     " --checkpoint " + checkpoint_path() + " --out " + g_dir +
                     "/folds.json --grid 0..2 --folds 3");
    REQUIRE(rc == 0);
    json j = json::parse(read_file(g_dir + "/folds.json"));
    CHECK(j.contains("mu_au"));
    CHECK(j.contains("mu_msg"));
    CHECK(j.at("folds").size() == 9); // 3 folds x 3 grid points
    double mu_au = j.at("mu_au").get<double>();
    CHECK(mu_au >= 0.0);
    CHECK(mu_au <= 2.0);

    SUBCASE("comma-separated grids work too") {
        int rc2 = run_cli("--seed 4 smooth-search --data " + manifest_path() +
                          " --checkpoint " + checkpoint_path() + " --out " + g_dir +
                          "/folds2.json --grid 0,2 --folds 3");
        REQUIRE(rc2 == 0);
        json j2 = json::parse(read_file(g_dir + "/folds2.json"));
        CHECK(j2.at("folds").size() == 6);
    }
}

TEST_CASE("evaluate accepts smoothing parameters") {
    int rc = run_cli("evaluate --data " + manifest_path() + " --checkpoint " +
                     checkpoint_path() + " --mu-au 2 --mu-msg 3 --out " + g_dir +
                     "/report_smooth.json");
    REQUIRE(rc == 0);
    json rep = json::parse(read_file(g_dir + "/report_smooth.json"));
    CHECK(rep.contains("composite"));
}

TEST_CASE("report renders plots from the log and fold report") {
    int rc = run_cli("report --log " + run_dir() + "/train_log.jsonl" +
                     " --fold-report " + g_dir + "/folds.json --out " + g_dir +
                     "/plots");
    REQUIRE(rc == 0);
    for (const char* f : {"/plots/loss_curves.svg", "/plots/lr_curve.svg",
                          "/plots/mu_metrics.svg"}) {
        std::string svg = read_file(g_dir + f);
        CHECK(svg.find("<svg") != std::string::npos);
        CHECK(svg.find("polyline") != std::string::npos);
    }
}

int main(int argc, char** argv) {
    doctest::Context context;
    int doctest_argc = argc;
    if (argc > 1 && argv[argc - 1][0] != '-') {
        g_binary = argv[argc - 1];
        doctest_argc = argc - 1;
    }
    if (g_binary.empty()) {
        std::fprintf(stderr, "usage: test_cli [doctest options] <smm binary>\n");
        return 1;
    }
    context.applyCommandLine(doctest_argc, argv);
    g_dir = (fs::temp_directory_path() / "smm_cli_test").string();
    fs::remove_all(g_dir);
    fs::create_directories(g_dir);
    int rc = context.run();
    fs::remove_all(g_dir);
    return rc;
}

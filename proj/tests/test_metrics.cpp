#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smm/metrics.hpp"
#include "smm/verification.hpp"

#include <cstdio>
#include <fstream>

using namespace smm;
using namespace smm::metrics;

TEST_CASE("f1_binary formula cases") {
    SUBCASE("perfect prediction") {
        auto r = f1_binary({1, 0, 1, 0}, {1, 0, 1, 0});
        CHECK(r.value == doctest::Approx(1.0));
        CHECK(!r.degenerate);
    }
    SUBCASE("hand-computed mixed case") {
        // tp=2, fp=1, fn=1 -> F1 = 4/6
        auto r = f1_binary({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0});
        CHECK(r.value == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("no positives anywhere is 0 and flagged") {
        auto r = f1_binary({0, 0, 0}, {0, 0, 0});
        CHECK(r.value == 0.0);
        CHECK(r.degenerate);
    }
    SUBCASE("all false positives") {
        auto r = f1_binary({1, 1}, {0, 0});
        CHECK(r.value == 0.0);
        CHECK(!r.degenerate);
    }
    SUBCASE("matches the oracle on random sequences") {
        Rng rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            int n = 1 + static_cast<int>(rng.below(40));
            std::vector<int> p(static_cast<std::size_t>(n)),
                t(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                p[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
                t[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(2));
            }
            CHECK(f1_binary(p, t).value == doctest::Approx(verify::oracle_f1(p, t)));
        }
    }
}

TEST_CASE("f1_au thresholds probabilities and masks missing labels") {
    Mat probs(3, 2);
    probs << 0.9, 0.2, 0.4, 0.8, 0.7, 0.1;
    Eigen::MatrixXi targets(3, 2);
    targets << 1, 0, 0, 1, -1, 0;

    auto r = f1_au(probs, targets, 0.5);
    REQUIRE(r.per_au.size() == 2);
    // AU0 unmasked rows: pred {1,0}, target {1,0} -> 1.0
    CHECK(r.per_au(0) == doctest::Approx(1.0));
    // AU1: pred {0,1,0}, target {0,1,0} -> 1.0
    CHECK(r.per_au(1) == doctest::Approx(1.0));
    CHECK(r.mean == doctest::Approx(1.0));

    SUBCASE("moving the threshold changes predictions") {
        auto strict = f1_au(probs, targets, 0.95);
        CHECK(strict.per_au(0) == 0.0); // no positive predictions left
    }
    SUBCASE("fully masked unit is an error") {
        Eigen::MatrixXi all_masked = Eigen::MatrixXi::Constant(3, 2, -1);
        all_masked.col(0).setZero();
        CHECK_THROWS_AS(f1_au(probs, all_masked, 0.5), Error);
    }
    SUBCASE("threshold must lie strictly inside (0,1)") {
        CHECK_THROWS_AS(f1_au(probs, targets, 0.0), Error);
        CHECK_THROWS_AS(f1_au(probs, targets, 1.0), Error);
    }
}

TEST_CASE("macro_f1_expr") {
    SUBCASE("hand confusion with three classes") {
        // targets: 0,0,0,1,1,2; argmax preds: 0,0,1,1,1,0
        Mat logits(6, 3);
        logits << 5, 0, 0, 5, 0, 0, 0, 5, 0, 0, 5, 0, 0, 5, 0, 5, 0, 0;
        Eigen::VectorXi targets(6);
        targets << 0, 0, 0, 1, 1, 2;
        auto r = macro_f1_expr(logits, targets, 3);
        // class0: tp=2 fp=1 fn=1 -> 2/3; class1: tp=2 fp=1 fn=0 -> 0.8;
        // class2: no predictions, no tp -> 0. macro = (2/3+0.8+0)/3.
        CHECK(r.per_class(0) == doctest::Approx(2.0 / 3.0));
        CHECK(r.per_class(1) == doctest::Approx(0.8));
        CHECK(r.per_class(2) == 0.0);
        CHECK(r.value == doctest::Approx((2.0 / 3.0 + 0.8) / 3.0));
        CHECK(r.absent_classes.empty()); // class 2 appears in the targets
    }
    SUBCASE("fixed denominator includes absent classes") {
        Mat logits(2, 4);
        logits << 9, 0, 0, 0, 0, 9, 0, 0;
        Eigen::VectorXi targets(2);
        targets << 0, 1;
        auto r = macro_f1_expr(logits, targets, 4);
        CHECK(r.value == doctest::Approx(0.5)); // (1+1+0+0)/4
        CHECK(r.absent_classes == std::vector<int>{2, 3});
    }
    SUBCASE("masked samples are skipped") {
        Mat logits(3, 2);
        logits << 9, 0, 0, 9, 9, 0;
        Eigen::VectorXi targets(3);
        targets << 0, 1, -1;
        auto r = macro_f1_expr(logits, targets, 2);
        CHECK(r.value == doctest::Approx(1.0));
    }
    SUBCASE("matches the oracle on random argmax data") {
        Rng rng(12);
        for (int trial = 0; trial < 100; ++trial) {
            int n = 5 + static_cast<int>(rng.below(40));
            Mat logits(n, 4);
            Eigen::VectorXi targets(n);
            std::vector<int> pred_v, targ_v;
            for (int i = 0; i < n; ++i) {
                int arg = static_cast<int>(rng.below(4));
                logits.row(i).setZero();
                logits(i, arg) = 1.0;
                targets(i) = static_cast<int>(rng.below(4));
                pred_v.push_back(arg);
                targ_v.push_back(targets(i));
            }
            CHECK(macro_f1_expr(logits, targets, 4).value ==
                  doctest::Approx(verify::oracle_macro_f1(pred_v, targ_v, 4)));
        }
    }
    SUBCASE("adding a constant to every logit row leaves argmax unchanged") {
        Rng rng(13);
        Mat logits(10, 3);
        Eigen::VectorXi targets(10);
        for (int i = 0; i < 10; ++i) {
            for (int c = 0; c < 3; ++c) logits(i, c) = rng.uniform(-1.0, 1.0);
            targets(i) = static_cast<int>(rng.below(3));
        }
        auto base = macro_f1_expr(logits, targets, 3);
        Mat shifted = logits.array() + 7.5;
        CHECK(macro_f1_expr(shifted, targets, 3).value == doctest::Approx(base.value));
    }
}

TEST_CASE("mtl_score arithmetic") {
    SUBCASE("perfect everything scores 3") {
        CHECK(mtl_score(1.0, 1.0, Vec::Ones(8), Vec::Ones(12)) ==
              doctest::Approx(3.0));
    }
    SUBCASE("all zero scores 0") {
        CHECK(mtl_score(0.0, 0.0, Vec::Zero(8), Vec::Zero(12)) == doctest::Approx(0.0));
    }
    SUBCASE("hand-computed mixture") {
        Vec expr = Vec::Constant(8, 0.5);
        Vec au = Vec::Constant(12, 0.25);
        // 0.5*(0.6+0.4) + 8*0.5/8 + 12*0.25/12 = 0.5 + 0.5 + 0.25
        CHECK(mtl_score(0.6, 0.4, expr, au) == doctest::Approx(1.25));
    }
    SUBCASE("monotone in each component") {
        Vec expr = Vec::Constant(8, 0.5);
        Vec au = Vec::Constant(12, 0.5);
        double base = mtl_score(0.5, 0.5, expr, au);
        CHECK(mtl_score(0.6, 0.5, expr, au) > base);
        Vec better_au = au;
        better_au(3) = 0.9;
        CHECK(mtl_score(0.5, 0.5, expr, better_au) > base);
    }
    SUBCASE("vector length is enforced") {
        CHECK_THROWS_AS(mtl_score(0.5, 0.5, Vec::Ones(7), Vec::Ones(12)), Error);
        CHECK_THROWS_AS(mtl_score(0.5, 0.5, Vec::Ones(8), Vec::Ones(11)), Error);
    }
}

TEST_CASE("report serialization") {
    Report r;
    r.f1_au_mean = 0.75;
    r.f1_au_per_unit = Vec::Constant(2, 0.75);
    r.macro_f1_expr = 0.5;
    r.composite = 1.9;
    r.partial = true;

    std::string j = r.to_json();
    CHECK(j.find("0.75") != std::string::npos);
    CHECK(j.find("partial") != std::string::npos);

    std::string path = "/tmp/smm_test_report.json";
    write_report(r, path);
    std::ifstream in(path);
    std::string contents{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
    CHECK(contents.find("composite") != std::string::npos);
    std::remove(path.c_str());
}

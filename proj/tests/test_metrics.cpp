#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "honestcalib/metrics.hpp"
#include "honestcalib/rng.hpp"
#include "honestcalib/synth.hpp"

using namespace honestcalib;

namespace {

// Minimal gold-bearing record with a given confidence, spread over 4 ids.
PredictionRecord rec(double conf, bool correct, int pred = 0) {
    PredictionRecord r;
    static int counter = 0;
    r.record_id = "m" + std::to_string(counter++);
    r.distribution.vocab_size = 8;
    double rest = (1.0 - conf) / 3.0;
    int ids[4] = {pred, (pred + 1) % 8, (pred + 2) % 8, (pred + 3) % 8};
    r.distribution.entries = {{ids[0], conf}, {ids[1], rest}, {ids[2], rest}, {ids[3], rest}};
    r.predicted_id = pred;
    r.gold_id = correct ? pred : (pred + 1) % 8;
    r.anchor_embedding = {1.0, 0.0};
    r.answer_embedding = {0.0, 1.0};
    return r;
}

Mask mask_of(std::initializer_list<int> cells, std::size_t w) {
    Mask m;
    m.width = w;
    m.height = cells.size() / w;
    for (int c : cells) m.cells.push_back(static_cast<std::uint8_t>(c));
    return m;
}

// O(n^2) pairwise reference for the rank-sum AUC.
double auc_brute(const std::vector<PredictionRecord>& records) {
    std::vector<double> cs, is;
    for (const auto& r : records) {
        double c = 0;
        for (const auto& e : r.distribution.entries) c = std::max(c, e.prob);
        (r.predicted_id == *r.gold_id ? cs : is).push_back(c);
    }
    double wins = 0.0;
    for (double c : cs)
        for (double i : is) wins += c > i ? 1.0 : (c == i ? 0.5 : 0.0);
    return wins / (static_cast<double>(cs.size()) * static_cast<double>(is.size()));
}

}  // namespace

TEST_CASE("honesty scores equal one minus the mean confidence gap") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.6, false)};
    auto [h_lemma, h_rep] = honesty_scores(rs);
    CHECK(h_rep == doctest::Approx(0.35).epsilon(1e-15));
    CHECK(h_lemma == doctest::Approx(0.65).epsilon(1e-15));
    CHECK(h_lemma + h_rep == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("honesty identity holds on random data") {
    Rng rng(31);
    for (int it = 0; it < 50; ++it) {
        std::vector<PredictionRecord> rs;
        std::size_t n = 1 + rng.below(40);
        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double c = rng.uniform(0.28, 0.99);
            bool correct = rng.bernoulli(0.6);
            rs.push_back(rec(c, correct));
            gap += std::abs(c - (correct ? 1.0 : 0.0));
        }
        auto [h_lemma, h_rep] = honesty_scores(rs);
        CHECK(h_rep == doctest::Approx(gap / static_cast<double>(n)).epsilon(1e-12));
        CHECK(h_lemma == doctest::Approx(1.0 - gap / static_cast<double>(n)).epsilon(1e-12));
        CHECK(h_rep >= 0.0);
        CHECK(h_rep <= 1.0);
    }
}

TEST_CASE("eci separates a clean ordering perfectly") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.8, true), rec(0.7, false),
                                     rec(0.4, false)};
    auto [auc, reported] = eci_scores(rs);
    CHECK(auc == 1.0);
    CHECK(reported == 0.0);
}

TEST_CASE("eci credits ties half a win") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.7, true), rec(0.7, false),
                                     rec(0.4, false)};
    CHECK(eci_scores(rs).first == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("eci equals the quadratic reference, ties included") {
    Rng rng(37);
    for (int it = 0; it < 60; ++it) {
        std::vector<PredictionRecord> rs;
        std::size_t n = 2 + rng.below(60);
        bool saw_correct = false, saw_wrong = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse confidence grid forces many exact ties.
            double c = 0.3 + 0.1 * static_cast<double>(rng.below(7));
            bool correct = rng.bernoulli(0.5);
            saw_correct |= correct;
            saw_wrong |= !correct;
            rs.push_back(rec(c, correct));
        }
        if (!saw_correct || !saw_wrong) continue;
        CHECK(std::abs(eci_scores(rs).first - auc_brute(rs)) <= 1e-12);
    }
}

TEST_CASE("eci needs both outcomes") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.8, true)};
    CHECK_THROWS_AS(eci_scores(rs), std::invalid_argument);
}

TEST_CASE("accuracy and macro f1 on the worked example") {
    // gold a,a,b,b vs pred a,b,b,b
    std::vector<PredictionRecord> rs;
    rs.push_back(rec(0.6, true, 0));   // pred a gold a
    rs.push_back(rec(0.6, false, 1));  // pred b gold 2 -> fix below
    rs.back().gold_id = 0;             // pred b gold a
    rs.push_back(rec(0.6, true, 1));   // pred b gold b
    rs.push_back(rec(0.6, true, 1));   // pred b gold b
    CHECK(accuracy(rs) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(macro_f1(rs) == doctest::Approx(0.7333333333333334).epsilon(1e-14));
}

TEST_CASE("macro f1 counts classes absent from gold") {
    // One record: pred b, gold a. Classes {a, b}: F1(a)=0 (no tp), F1(b)=0.
    std::vector<PredictionRecord> rs;
    rs.push_back(rec(0.6, false, 1));
    rs.back().gold_id = 0;
    CHECK(macro_f1(rs) == 0.0);
    CHECK(accuracy(rs) == 0.0);
}

TEST_CASE("iou exact cases") {
    auto a = mask_of({1, 1, 0, 0}, 2);
    auto b = mask_of({1, 1, 0, 0}, 2);
    CHECK(attention_iou(a, b) == 1.0);

    auto c = mask_of({0, 0, 1, 1}, 2);
    CHECK(attention_iou(a, c) == 0.0);

    auto d = mask_of({0, 1, 1, 0}, 2);  // overlap 1, union 3
    CHECK(attention_iou(a, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    auto empty = mask_of({0, 0, 0, 0}, 2);
    CHECK(attention_iou(a, empty) == 0.0);
    CHECK(attention_iou(empty, empty) == 1.0);

    auto wide = mask_of({1, 0, 0, 0, 0, 0}, 3);
    CHECK_THROWS_AS(attention_iou(a, wide), std::invalid_argument);
}

TEST_CASE("iou half and two-sevenths shift cases") {
    // 3x3 blocks in 8x8, shifted by one column: overlap 6, union 12.
    Mask m1, m2;
    m1.height = m1.width = m2.height = m2.width = 8;
    m1.cells.assign(64, 0);
    m2.cells.assign(64, 0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            m1.cells[r * 8 + c] = 1;
            m2.cells[r * 8 + c + 1] = 1;
        }
    CHECK(attention_iou(m1, m2) == doctest::Approx(0.5).epsilon(1e-15));

    // Diagonal shift by (1,1): overlap 4, union 14.
    Mask m3 = m1;
    m3.cells.assign(64, 0);
    for (std::size_t r = 1; r < 4; ++r)
        for (std::size_t c = 1; c < 4; ++c) m3.cells[r * 8 + c] = 1;
    CHECK(attention_iou(m1, m3) == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("low agreement uses a strict threshold") {
    CHECK(low_agreement_fraction({0.39, 0.40, 0.41}, 0.40) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(low_agreement_fraction({0.40, 0.40}, 0.40) == 0.0);
    CHECK_THROWS_AS(low_agreement_fraction({}, 0.4), std::invalid_argument);
    CHECK_THROWS_AS(low_agreement_fraction({1.5}, 0.4), std::invalid_argument);
}

TEST_CASE("report on a synthetic corpus") {
    SynthConfig cfg;
    cfg.n_records = 200;
    cfg.seed = 11;
    auto records = generate(cfg);
    auto rep = build_report(records);
    CHECK(rep.n_records == 200);
    CHECK(rep.accuracy > 0.6);
    CHECK(rep.accuracy < 0.8);
    CHECK(rep.h_lemma == doctest::Approx(1.0 - rep.h_reported).epsilon(1e-12));
    REQUIRE(rep.eci_auc.has_value());
    REQUIRE(rep.eci_reported.has_value());
    CHECK(*rep.eci_auc == doctest::Approx(1.0 - *rep.eci_reported).epsilon(1e-12));
    CHECK(*rep.eci_auc > 0.5);
    REQUIRE(rep.mean_iou.has_value());
    REQUIRE(rep.low_agreement_frac.has_value());
    // Correct records carry identical masks, wrong ones disjoint masks.
    CHECK(*rep.mean_iou == doctest::Approx(rep.accuracy).epsilon(1e-12));
    CHECK(*rep.low_agreement_frac == doctest::Approx(1.0 - rep.accuracy).epsilon(1e-12));
    CHECK(rep.abstention_rate >= 0.0);
    CHECK(rep.abstention_rate <= 1.0);
}

TEST_CASE("iou fields stay empty without masks") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.6, false)};
    auto rep = build_report(rs);
    CHECK_FALSE(rep.mean_iou.has_value());
    CHECK_FALSE(rep.low_agreement_frac.has_value());
}

TEST_CASE("report serialization is deterministic and complete") {
    std::vector<PredictionRecord> rs{rec(0.9, true), rec(0.6, false)};
    auto rep = build_report(rs);
    auto j1 = report_to_json(rep);
    auto j2 = report_to_json(rep);
    CHECK(j1 == j2);
    CHECK(j1.find("\"h_reported\"") != std::string::npos);
    CHECK(j1.find("\"mean_iou\": null") != std::string::npos);

    auto csv = report_to_csv(rep);
    CHECK(csv.find("n_records,accuracy") == 0);
    CHECK(csv == report_to_csv(rep));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "honestcalib/mining.hpp"
#include "honestcalib/runtime.hpp"
#include "honestcalib/synth.hpp"
#include "honestcalib/uncertainty.hpp"

using namespace honestcalib;

namespace {

// Correct, well-aligned record: candidate positive.
PredictionRecord positive_record(const std::string& id, Vec answer_emb = {0.0, 1.0}) {
    PredictionRecord r;
    r.record_id = id;
    r.distribution.vocab_size = 4;
    r.distribution.entries = {{0, 0.7}, {1, 0.15}, {2, 0.15}};
    r.predicted_id = 0;
    r.gold_id = 0;
    r.predicted_tokens = {"paris"};
    r.gold_tokens = {"paris"};
    r.token_embeddings["paris"] = {1.0, 0.0};
    r.anchor_embedding = {1.0, 1.0};
    r.answer_embedding = std::move(answer_emb);
    return r;
}

// Wrong, overconfident, low-entropy record: candidate negative.
PredictionRecord negative_record(const std::string& id, Vec answer_emb = {1.0, 0.0}) {
    PredictionRecord r;
    r.record_id = id;
    r.distribution.vocab_size = 4;
    r.distribution.entries = {{0, 0.9}, {1, 0.08}, {2, 0.02}};
    r.predicted_id = 0;
    r.gold_id = 1;
    r.predicted_tokens = {"london"};
    r.gold_tokens = {"paris"};
    r.token_embeddings["london"] = {0.0, 3.0};
    r.token_embeddings["paris"] = {1.0, 0.0};
    r.anchor_embedding = {1.0, -1.0};
    r.answer_embedding = std::move(answer_emb);
    return r;
}

// Wrong but hedged record: in neither pool, still anchors.
PredictionRecord neutral_record(const std::string& id) {
    PredictionRecord r;
    r.record_id = id;
    r.distribution.vocab_size = 4;
    r.distribution.entries = {{0, 0.4}, {1, 0.3}, {2, 0.3}};
    r.predicted_id = 0;
    r.gold_id = 2;
    r.predicted_tokens = {"rome"};
    r.gold_tokens = {"madrid"};
    r.token_embeddings["rome"] = {0.0, 2.0};
    r.token_embeddings["madrid"] = {2.0, 0.0};
    r.anchor_embedding = {0.5, 0.5};
    r.answer_embedding = {0.3, 0.3};
    return r;
}

}  // namespace

TEST_CASE("positive eligibility is distance below delta plus id agreement") {
    auto r = positive_record("a");
    CHECK(eligible_positive(r, 0.4));  // identical token bags: distance 0

    r.predicted_id = 1;  // break id agreement but keep the bags identical
    r.distribution.entries = {{0, 0.15}, {1, 0.7}, {2, 0.15}};
    CHECK_FALSE(eligible_positive(r, 0.4, true));
    CHECK(eligible_positive(r, 0.4, false));  // relaxed alignment allows it

    auto far = positive_record("b");
    far.gold_tokens = {"london"};
    far.token_embeddings["london"] = {0.0, 3.0};  // distance ~3.16 >= delta
    CHECK_FALSE(eligible_positive(far, 0.4));

    far.gold_id.reset();
    CHECK_THROWS_AS(eligible_positive(far, 0.4), std::invalid_argument);
}

TEST_CASE("negative eligibility matches the overconfident-failure predicate") {
    auto neg = negative_record("n");
    CHECK(eligible_negative(neg, 0.8, 0.5));
    CHECK(is_overconfident_failure(neg, 0.8, 0.5));
    CHECK_FALSE(eligible_negative(positive_record("p"), 0.8, 0.5));
    CHECK_FALSE(eligible_negative(neutral_record("m"), 0.8, 0.5));
}

TEST_CASE("mining emits validating triplets and prefers the own answer as positive") {
    std::vector<PredictionRecord> batch{positive_record("p0"), negative_record("n0"),
                                        neutral_record("m0")};
    Hyperparams hp;
    auto triplets = mine_triplets(batch, hp, 99);
    REQUIRE(triplets.size() == 3);
    for (const auto& t : triplets) CHECK_FALSE(validate_triplet(t, batch, hp).has_value());

    // The correct record anchors with its own answer embedding as positive.
    CHECK(triplets[0].anchor_record_id == "p0");
    CHECK(triplets[0].positive_record_id == "p0");
    CHECK(triplets[0].negative_record_id == "n0");

    // The only pool members serve every other anchor too.
    CHECK(triplets[1].anchor_record_id == "n0");
    CHECK(triplets[1].positive_record_id == "p0");
    CHECK(triplets[2].anchor_record_id == "m0");
}

TEST_CASE("mining is deterministic in the seed") {
    std::vector<PredictionRecord> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(positive_record("p" + std::to_string(i)));
    for (int i = 0; i < 3; ++i) batch.push_back(negative_record("n" + std::to_string(i)));
    batch.push_back(neutral_record("m0"));
    Hyperparams hp;
    auto t1 = mine_triplets(batch, hp, 1234);
    auto t2 = mine_triplets(batch, hp, 1234);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].anchor_record_id == t2[i].anchor_record_id);
        CHECK(t1[i].positive_record_id == t2[i].positive_record_id);
        CHECK(t1[i].negative_record_id == t2[i].negative_record_id);
        CHECK(t1[i].anchor == t2[i].anchor);
        CHECK(t1[i].positive == t2[i].positive);
        CHECK(t1[i].negative == t2[i].negative);
    }

    auto t3 = mine_triplets(batch, hp, 1235);
    bool any_diff = false;
    for (std::size_t i = 0; i < t1.size() && i < t3.size(); ++i)
        any_diff = any_diff || t1[i].negative_record_id != t3[i].negative_record_id ||
                   t1[i].positive_record_id != t3[i].positive_record_id;
    CHECK(any_diff);  // different seed reshuffles at least one draw
}

TEST_CASE("pool membership is mutually exclusive under strict alignment") {
    std::vector<PredictionRecord> batch{positive_record("p0"), negative_record("n0"),
                                        neutral_record("m0"), positive_record("p1"),
                                        negative_record("n1")};
    Hyperparams hp;
    for (const auto& t : mine_triplets(batch, hp, 5)) {
        const PredictionRecord* pos = nullptr;
        const PredictionRecord* neg = nullptr;
        for (const auto& r : batch) {
            if (r.record_id == t.positive_record_id) pos = &r;
            if (r.record_id == t.negative_record_id) neg = &r;
        }
        REQUIRE(pos != nullptr);
        REQUIRE(neg != nullptr);
        CHECK(eligible_positive(*pos, hp.delta, hp.strict_alignment));
        CHECK_FALSE(eligible_negative(*pos, hp.tau1, hp.tau2));
        CHECK(eligible_negative(*neg, hp.tau1, hp.tau2));
        CHECK_FALSE(eligible_positive(*neg, hp.delta, hp.strict_alignment));
    }
}

TEST_CASE("no triplets without a full pool") {
    Hyperparams hp;
    std::vector<PredictionRecord> only_pos{positive_record("p0"), positive_record("p1")};
    CHECK(mine_triplets(only_pos, hp, 1).empty());
    std::vector<PredictionRecord> only_neg{negative_record("n0"), neutral_record("m0")};
    CHECK(mine_triplets(only_neg, hp, 1).empty());
    CHECK_THROWS_AS(mine_triplets({}, hp, 1), std::invalid_argument);
}

TEST_CASE("zero-norm embeddings are excluded") {
    auto pos_zero = positive_record("pz", {0.0, 0.0});
    std::vector<PredictionRecord> batch{pos_zero, negative_record("n0")};
    Hyperparams hp;
    CHECK(mine_triplets(batch, hp, 1).empty());  // no usable positive

    auto anchor_zero = positive_record("az");
    anchor_zero.anchor_embedding = {0.0, 0.0};
    std::vector<PredictionRecord> batch2{anchor_zero, positive_record("p0"),
                                         negative_record("n0")};
    auto triplets = mine_triplets(batch2, hp, 1);
    for (const auto& t : triplets) CHECK(t.anchor_record_id != "az");
}

TEST_CASE("hard negatives pick the highest cosine to the anchor") {
    auto anchor = positive_record("p0");
    anchor.anchor_embedding = {1.0, 0.0};
    auto aligned = negative_record("n-aligned", {5.0, 0.4});   // cos ~ 0.997
    auto opposed = negative_record("n-opposed", {-2.0, 0.1});  // cos ~ -1
    std::vector<PredictionRecord> batch{anchor, opposed, aligned};
    Hyperparams hp;
    hp.hard_negatives = true;
    auto triplets = mine_triplets(batch, hp, 77);
    REQUIRE_FALSE(triplets.empty());
    CHECK(triplets[0].anchor_record_id == "p0");
    CHECK(triplets[0].negative_record_id == "n-aligned");
}

TEST_CASE("gold-positive preference picks pool records predicting the anchor's gold") {
    // Anchor is wrong with gold id 1; one pool record predicts 1.
    auto anchor = negative_record("a0");  // gold_id = 1
    auto match = positive_record("match");
    match.distribution.entries = {{0, 0.15}, {1, 0.7}, {2, 0.15}};
    match.predicted_id = 1;
    match.gold_id = 1;
    auto other = positive_record("other");  // predicts 0
    std::vector<PredictionRecord> batch{anchor, match, other, negative_record("n1")};
    Hyperparams hp;
    hp.use_gold_positive = true;
    auto triplets = mine_triplets(batch, hp, 3);
    for (const auto& t : triplets)
        if (t.anchor_record_id == "a0") CHECK(t.positive_record_id == "match");
}

TEST_CASE("the worker count does not change the result") {
    SynthConfig cfg;
    cfg.n_records = 120;
    cfg.seed = 21;
    auto records = generate(cfg);
    Hyperparams hp;
    set_max_threads(1);
    auto serial = mine_triplets(records, hp, 8);
    set_max_threads(4);
    auto parallel = mine_triplets(records, hp, 8);
    set_max_threads(1);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].anchor_record_id == parallel[i].anchor_record_id);
        CHECK(serial[i].positive_record_id == parallel[i].positive_record_id);
        CHECK(serial[i].negative_record_id == parallel[i].negative_record_id);
        CHECK(serial[i].anchor == parallel[i].anchor);
    }
}

TEST_CASE("validate_triplet flags foreign and corrupt triplets") {
    std::vector<PredictionRecord> batch{positive_record("p0"), negative_record("n0")};
    Hyperparams hp;
    auto triplets = mine_triplets(batch, hp, 1);
    REQUIRE_FALSE(triplets.empty());

    auto foreign = triplets[0];
    foreign.positive_record_id = "ghost";
    CHECK(validate_triplet(foreign, batch, hp).has_value());

    auto swapped = triplets[0];
    std::swap(swapped.positive_record_id, swapped.negative_record_id);
    CHECK(validate_triplet(swapped, batch, hp).has_value());

    auto bad_dim = triplets[0];
    bad_dim.negative.push_back(0.0);
    CHECK(validate_triplet(bad_dim, batch, hp).has_value());

    auto zeroed = triplets[0];
    for (auto& x : zeroed.anchor) x = 0.0;
    CHECK(validate_triplet(zeroed, batch, hp).has_value());
}

TEST_CASE("triplet json lines carry ids and vectors") {
    std::vector<PredictionRecord> batch{positive_record("p0"), negative_record("n0")};
    Hyperparams hp;
    auto triplets = mine_triplets(batch, hp, 1);
    REQUIRE_FALSE(triplets.empty());
    auto line = triplet_to_json_line(triplets[0]);
    CHECK(line.find("\"anchor_id\":\"p0\"") != std::string::npos);
    CHECK(line.find("\"negative_id\":\"n0\"") != std::string::npos);
    CHECK(line == triplet_to_json_line(triplets[0]));
}

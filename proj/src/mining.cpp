#include "honestcalib/mining.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "honestcalib/rng.hpp"
#include "honestcalib/runtime.hpp"
#include "honestcalib/transport.hpp"
#include "honestcalib/uncertainty.hpp"
#include "honestcalib/vecmath.hpp"

namespace honestcalib {

namespace {

constexpr double kZeroNormTol = 1e-12;

double cosine(const Vec& u, const Vec& v) {
    double nu = norm(u), nv = norm(v);
    if (nu <= kZeroNormTol || nv <= kZeroNormTol) return -1.0;  // never "hardest"
    return dot(u, v) / (nu * nv);
}

}  // namespace

bool eligible_positive(const PredictionRecord& record, double delta, bool strict_alignment) {
    if (!record.gold_id) throw std::invalid_argument("gold required");
    if (strict_alignment && record.predicted_id != *record.gold_id) return false;
    return wmd(record.predicted_tokens, record.gold_tokens, record.token_embeddings) < delta;
}

bool eligible_negative(const PredictionRecord& record, double tau1, double tau2) {
    return is_overconfident_failure(record, tau1, tau2);
}

std::vector<Triplet> mine_triplets(const std::vector<PredictionRecord>& batch,
                                   const Hyperparams& params, std::uint64_t seed) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("empty batch");

    // Eligibility flags. Records without gold join neither pool but may
    // still anchor a triplet. Order-independent, so safe to parallelize.
    std::vector<char> pos_ok(n, 0), neg_ok(n, 0);
    auto classify = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (!batch[i].gold_id) continue;
            pos_ok[i] = eligible_positive(batch[i], params.delta, params.strict_alignment) &&
                        norm(batch[i].answer_embedding) > kZeroNormTol;
            neg_ok[i] = eligible_negative(batch[i], params.tau1, params.tau2) &&
                        norm(batch[i].answer_embedding) > kZeroNormTol;
        }
    };
    const std::size_t threads = std::min<std::size_t>(max_threads(), n);
    if (threads <= 1) {
        classify(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
            if (lo < hi) pool.emplace_back(classify, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<std::size_t> pos_pool, neg_pool;
    for (std::size_t i = 0; i < n; ++i) {
        if (pos_ok[i]) pos_pool.push_back(i);
        if (neg_ok[i]) neg_pool.push_back(i);
    }

    std::vector<Triplet> out;
    if (pos_pool.empty() || neg_pool.empty()) return out;

    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const PredictionRecord& anchor = batch[i];
        if (norm(anchor.anchor_embedding) <= kZeroNormTol) continue;

        std::size_t pos_idx;
        if (pos_ok[i]) {
            pos_idx = i;  // own answer embedding preferred
        } else if (params.use_gold_positive && anchor.gold_id) {
            // Prefer pool records that predicted this anchor's gold answer.
            std::vector<std::size_t> matching;
            for (std::size_t p : pos_pool)
                if (batch[p].predicted_id == *anchor.gold_id) matching.push_back(p);
            const auto& source = matching.empty() ? pos_pool : matching;
            pos_idx = source[rng.below(source.size())];
        } else {
            pos_idx = pos_pool[rng.below(pos_pool.size())];
        }

        // Without strict alignment a record can sit in both pools; never let
        // the same record serve as both sides of one triplet.
        std::vector<std::size_t> neg_candidates;
        for (std::size_t k : neg_pool)
            if (k != pos_idx) neg_candidates.push_back(k);
        if (neg_candidates.empty()) continue;

        std::size_t neg_idx;
        if (params.hard_negatives) {
            neg_idx = neg_candidates[0];
            double best = cosine(anchor.anchor_embedding, batch[neg_candidates[0]].answer_embedding);
            for (std::size_t k = 1; k < neg_candidates.size(); ++k) {
                double c = cosine(anchor.anchor_embedding, batch[neg_candidates[k]].answer_embedding);
                if (c > best) {
                    best = c;
                    neg_idx = neg_candidates[k];
                }
            }
        } else {
            neg_idx = neg_candidates[rng.below(neg_candidates.size())];
        }

        Triplet t;
        t.anchor = anchor.anchor_embedding;
        t.positive = batch[pos_idx].answer_embedding;
        t.negative = batch[neg_idx].answer_embedding;
        t.anchor_record_id = anchor.record_id;
        t.positive_record_id = batch[pos_idx].record_id;
        t.negative_record_id = batch[neg_idx].record_id;
        out.push_back(std::move(t));
    }
    return out;
}

std::optional<std::string> validate_triplet(const Triplet& triplet,
                                            const std::vector<PredictionRecord>& batch,
                                            const Hyperparams& params) {
    auto find = [&](const std::string& id) -> const PredictionRecord* {
        for (const auto& r : batch)
            if (r.record_id == id) return &r;
        return nullptr;
    };
    const PredictionRecord* pos = find(triplet.positive_record_id);
    const PredictionRecord* neg = find(triplet.negative_record_id);
    if (!find(triplet.anchor_record_id)) return "anchor source record not in batch";
    if (!pos) return "positive source record not in batch";
    if (!neg) return "negative source record not in batch";
    if (triplet.positive_record_id == triplet.negative_record_id)
        return "positive and negative share a source record";
    if (!eligible_positive(*pos, params.delta, params.strict_alignment))
        return "positive source fails the alignment predicate";
    if (!eligible_negative(*neg, params.tau1, params.tau2))
        return "negative source fails the overconfident-failure predicate";
    if (triplet.anchor.size() != triplet.positive.size() ||
        triplet.anchor.size() != triplet.negative.size())
        return "triplet vectors differ in dimension";
    if (norm(triplet.anchor) <= kZeroNormTol || norm(triplet.positive) <= kZeroNormTol ||
        norm(triplet.negative) <= kZeroNormTol)
        return "triplet vector with zero norm";
    return std::nullopt;
}

std::string triplet_to_json_line(const Triplet& t) {
    nlohmann::ordered_json j;
    j["anchor_id"] = t.anchor_record_id;
    j["positive_id"] = t.positive_record_id;
    j["negative_id"] = t.negative_record_id;
    j["anchor"] = t.anchor;
    j["positive"] = t.positive;
    j["negative"] = t.negative;
    return j.dump();
}

}  // namespace honestcalib

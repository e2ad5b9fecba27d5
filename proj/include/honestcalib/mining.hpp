#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "honestcalib/records.hpp"

namespace honestcalib {

struct Triplet {
    Vec anchor;
    Vec positive;
    Vec negative;
    std::string anchor_record_id;
    std::string positive_record_id;
    std::string negative_record_id;
};

// Positive-pool membership: wmd(pred, gold) < delta, conjoined with exact id
// agreement when strict_alignment is set.
bool eligible_positive(const PredictionRecord& record, double delta, bool strict_alignment = true);

// Negative-pool membership: overconfident failure under (tau1, tau2).
bool eligible_negative(const PredictionRecord& record, double tau1, double tau2);

// Assembles one triplet per batch record whose positive and negative pools
// are non-empty. A record's own answer embedding is preferred as its
// positive when eligible; other draws are seeded-uniform (negatives
// hardest-by-cosine when params.hard_negatives). Deterministic given seed.
std::vector<Triplet> mine_triplets(const std::vector<PredictionRecord>& batch,
                                   const Hyperparams& params, std::uint64_t seed);

// Re-checks an emitted triplet against the selection predicates using the
// batch it came from. Returns std::nullopt when sound.
std::optional<std::string> validate_triplet(const Triplet& triplet,
                                            const std::vector<PredictionRecord>& batch,
                                            const Hyperparams& params);

std::string triplet_to_json_line(const Triplet& triplet);

}  // namespace honestcalib
